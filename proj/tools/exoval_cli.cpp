#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "exoval/dataset.hpp"
#include "exoval/error.hpp"
#include "exoval/experiments.hpp"
#include "exoval/parallel.hpp"
#include "exoval/rng.hpp"
#include "exoval/surface.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace exoval;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void log(const std::string& msg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::cerr << std::put_time(std::localtime(&now), "%H:%M:%S") << " exoval: " << msg << '\n';
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

// "--range xi=0.1,0.8" overrides one sampler range.
void apply_ranges(SamplerConfig& sampler, const std::vector<std::string>& ranges) {
    if (ranges.empty()) return;
    json j = sampler;
    for (const auto& r : ranges) {
        const auto eq = r.find('=');
        const auto comma = r.find(',', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || comma == std::string::npos)
            throw ConfigError("--range expects NAME=LO,HI, got '" + r + "'");
        const std::string name = r.substr(0, eq);
        if (!j.contains(name) || !j.at(name).is_array())
            throw ConfigError("--range: unknown sampler range '" + name + "'");
        try {
            j[name] = {std::stod(r.substr(eq + 1, comma - eq - 1)), std::stod(r.substr(comma + 1))};
        } catch (const std::logic_error&) {
            throw ConfigError("--range: bad number in '" + r + "'");
        }
    }
    sampler = j.get<SamplerConfig>();
}

std::vector<SurfaceDay> load_days(const std::string& spec, const SurfaceMask& mask, std::uint64_t seed) {
    if (spec.rfind("pseudo:", 0) == 0) {
        std::size_t count = 0;
        try {
            count = std::stoul(spec.substr(7));
        } catch (const std::logic_error&) {
            throw ConfigError("--days pseudo:N needs a day count");
        }
        if (count == 0) throw ConfigError("--days pseudo:N needs N >= 1");
        SamplerConfig sampler;
        sampler.snpStyle = true;
        log("generating " + std::to_string(count) + " pseudo-historical Bates days");
        return pseudo_historical_days(count, sampler, mask, derive_seed(seed, stream_tag("days")));
    }
    std::ifstream in(spec);
    if (!in) throw ConfigError("cannot open days file " + spec);
    auto days = read_surface_panel_csv(in);
    if (days.empty()) throw ConfigError("days file " + spec + " has no surfaces");
    return days;
}

VfaNetwork load_network(const std::string& path) { return vfa_from_json(read_json_file(path)); }

void print_parity_table(const ParityResult& r) {
    std::cout << std::left << std::setw(14) << "T" << std::setw(10) << "MCA MAE" << std::setw(10) << "VFA MAE"
              << "Sample Size\n"
              << std::fixed << std::setprecision(3);
    for (const auto& row : r.table) {
        std::ostringstream t;
        if (row.maturity > 0.0) t << row.maturity;
        else t << "Full Sample";
        std::cout << std::setw(14) << t.str() << std::setw(10) << row.mcaMae << std::setw(10) << row.vfaMae
                  << row.count << '\n';
    }
    std::cout << "excluded days: " << r.excludedDays << '\n';
}

// Sub-command options ----------------------------------------------------------

struct DatagenOptions {
    std::string config, model = "heston", exotic, out = "dataset.csv", mask, sampling;
    std::size_t rows = 0, paths = 0;
    std::uint64_t seed = 1;
    bool snp = false;
    std::vector<std::string> ranges;
};

struct TrainOptions {
    std::string data, config, exotic, model, out = "weights.json", history;
    std::uint64_t seed = 1;
    int maxEpochs = 0;
};

struct ExperimentOptions {
    std::string config, scale = "desk", outDir = ".", days = "pseudo:100", weights, weightsKo, weightsKi,
                weightsFirst, weightsSecond;
    std::vector<std::string> exotics;
    std::uint64_t seed = 0;
    std::size_t n = 0, rows = 0, paths = 0, labelPaths = 0, panel = 200;
};

struct FitOptions {
    std::string quotes, mask = "snp19", out = "surfaces.csv";
    double rate = 0.0, yield = 0.0;
};

int run_datagen(const DatagenOptions& o) {
    DatasetConfig cfg;
    if (!o.config.empty()) cfg = read_json_file(o.config).get<DatasetConfig>();
    cfg.model = parse_model_kind(o.model);
    if (o.rows) cfg.rows = o.rows;
    if (o.paths) cfg.mc.numPaths = o.paths;
    if (!o.mask.empty()) cfg.mask = parse_mask(o.mask);
    if (o.snp) cfg.sampler.snpStyle = true;
    if (o.sampling == "parity") cfg.sampler.exoticSampling = ExoticSampling::parity;
    else if (o.sampling == "controlled") cfg.sampler.exoticSampling = ExoticSampling::controlled;
    else if (!o.sampling.empty()) throw ConfigError("--sampling must be 'controlled' or 'parity'");
    apply_ranges(cfg.sampler, o.ranges);
    cfg.seed = o.seed;
    cfg.validate();

    const ExoticKind kind = parse_exotic_kind(o.exotic);
    log("generating " + std::to_string(cfg.rows) + " " + std::string(to_string(kind)) + " rows under " +
        std::string(to_string(cfg.model)));
    const TrainingSet set = generate_training_set(cfg, kind);
    {
        auto out = open_out(o.out);
        write_training_csv(out, set);
    }
    write_json(o.out + ".json", set.provenance);
    log("wrote " + o.out + " and " + o.out + ".json");
    return 0;
}

int run_train(const TrainOptions& o) {
    json provenance = json::object();
    if (fs::exists(o.data + ".json")) provenance = read_json_file(o.data + ".json");
    std::string exotic = o.exotic;
    if (exotic.empty()) exotic = provenance.value("exotic", std::string());
    if (exotic.empty()) throw ConfigError("--exotic is required when the dataset has no provenance sidecar");
    std::string model = o.model;
    if (model.empty()) model = provenance.value("model", std::string("heston"));
    const ExoticKind kind = parse_exotic_kind(exotic);

    TrainConfig cfg;
    if (!o.config.empty()) cfg = read_json_file(o.config).get<TrainConfig>();
    cfg.seed = o.seed;
    if (o.maxEpochs > 0) cfg.maxEpochs = o.maxEpochs;
    cfg.validate();

    std::ifstream in(o.data);
    if (!in) throw ConfigError("cannot open " + o.data);
    const TrainingSet set = read_training_csv(in, kind);
    log("training on " + std::to_string(set.size()) + " rows");
    const VfaTraining t = train_vfa(set, parse_model_kind(model), cfg);
    write_json(o.out, json(t.network));
    const std::string history = o.history.empty() ? o.out + ".history.csv" : o.history;
    {
        auto out = open_out(history);
        out << "epoch,train_mae,val_mae\n" << std::setprecision(17);
        for (std::size_t e = 0; e < t.history.valLoss.size(); ++e)
            out << e + 1 << ',' << t.history.trainLoss[e] << ',' << t.history.valLoss[e] << '\n';
    }
    std::cout << "best epoch " << t.history.bestEpoch << ", validation MAE " << t.history.bestValLoss
              << " (% of spot)\n";
    log("wrote " + o.out + " and " + history);
    return 0;
}

int run_controlled(const ExperimentOptions& o) {
    ControlledConfig cfg = controlled_preset(parse_scale(o.scale));
    if (!o.config.empty()) from_json(read_json_file(o.config), cfg);
    cfg.seed = o.seed;
    if (o.n) cfg.scenarios = o.n;
    if (o.rows) cfg.training.rows = o.rows;
    if (o.paths) cfg.mc.numPaths = o.paths;
    if (o.labelPaths) cfg.training.mc.numPaths = o.labelPaths;
    const ExoticKind kind = parse_exotic_kind(o.exotics.empty() ? "barrier" : o.exotics.front());
    log("controlled experiment: " + std::to_string(cfg.scenarios) + " scenarios, " +
        std::to_string(cfg.training.rows) + " training rows");
    const ControlledResult r =
        o.weights.empty() ? controlled_experiment(kind, cfg) : controlled_experiment(kind, cfg, load_network(o.weights));
    const fs::path dir(o.outDir);
    {
        auto out = open_out(dir / "controlled_records.csv");
        write_records_csv(out, r.records);
    }
    {
        auto out = open_out(dir / "controlled_scatter.dat");
        write_scatter_dat(out, r.records);
    }
    const json summary = controlled_summary(kind, r);
    write_json(dir / "controlled_summary.json", summary);
    std::cout << "Y = " << r.fit.intercept << " + " << r.fit.slope << " X  (t = " << r.fit.tIntercept << ", "
              << r.fit.tSlope << "), n = " << r.fit.n << ", excluded " << r.excluded << '\n';
    return 0;
}

int run_parity(const ExperimentOptions& o) {
    ParityConfig cfg = parity_preset(parse_scale(o.scale));
    if (!o.config.empty()) from_json(read_json_file(o.config), cfg);
    cfg.seed = o.seed;
    if (o.rows) cfg.training.rows = o.rows;
    if (o.paths) cfg.mc.numPaths = o.paths;
    if (o.labelPaths) cfg.training.mc.numPaths = o.labelPaths;
    cfg.validate();

    const auto days = load_days(o.days, cfg.training.mask, cfg.seed);
    ParityNetworks nets;
    if (!o.weightsKo.empty() || !o.weightsKi.empty()) {
        if (o.weightsKo.empty() || o.weightsKi.empty())
            throw ConfigError("--weights-ko and --weights-ki must be given together");
        nets = {load_network(o.weightsKo), load_network(o.weightsKi)};
    } else {
        log("training knock-out and knock-in networks on " + std::to_string(cfg.training.rows) + " rows");
        nets = train_parity_networks(cfg);
    }
    log("pricing " + std::to_string(days.size()) + " days");
    const ParityResult r = parity_experiment(days, cfg, nets);
    const fs::path dir(o.outDir);
    {
        auto out = open_out(dir / "parity_records.csv");
        write_parity_csv(out, r.records);
    }
    write_json(dir / "parity_summary.json", parity_summary(r));
    print_parity_table(r);
    return 0;
}

int run_modelrisk(const ExperimentOptions& o) {
    const Scale scale = parse_scale(o.scale);
    ModelRiskConfig cfg;
    cfg.sampler.snpStyle = true;
    DatasetConfig data;
    data.sampler.snpStyle = true;
    data.mask = SurfaceMask::snp19();
    data.rows = scale == Scale::desk ? 4000 : 400000;
    TrainConfig train;
    if (!o.config.empty()) {
        const json j = read_json_file(o.config);
        from_json(j, cfg);
        if (j.contains("training")) data = j.at("training").get<DatasetConfig>();
        if (j.contains("train")) train = j.at("train").get<TrainConfig>();
    }
    cfg.seed = o.seed;
    if (o.rows) data.rows = o.rows;
    if (o.labelPaths) data.mc.numPaths = o.labelPaths;
    if (o.paths) data.surfaceMc.numPaths = o.paths;

    const auto days = load_days(o.days, data.mask, cfg.seed);
    std::vector<ModelRiskPair> pairs;
    if (!o.weightsFirst.empty() || !o.weightsSecond.empty()) {
        if (o.weightsFirst.empty() || o.weightsSecond.empty())
            throw ConfigError("--weights-first and --weights-second must be given together");
        pairs.push_back({load_network(o.weightsFirst), load_network(o.weightsSecond)});
    } else {
        std::vector<std::string> names = o.exotics;
        if (names.empty()) names = {"barrier", "asian", "lookback"};
        for (const auto& name : names) {
            const ExoticKind kind = parse_exotic_kind(name);
            ModelRiskPair pair;
            for (ModelKind family : {ModelKind::lifted_heston, ModelKind::bates}) {
                DatasetConfig d = data;
                d.model = family;
                d.sampler.exoticSampling = cfg.sampler.exoticSampling;
                d.seed = derive_seed(cfg.seed, stream_tag(to_string(family)), stream_tag(to_string(kind)));
                log("training " + std::string(to_string(family)) + " " + std::string(to_string(kind)) +
                    " network on " + std::to_string(d.rows) + " rows");
                const TrainingSet set = generate_training_set(d, kind);
                TrainConfig tc = train;
                tc.seed = derive_seed(d.seed, stream_tag("train"));
                VfaNetwork net = train_vfa(set, family, tc).network;
                (family == ModelKind::lifted_heston ? pair.first : pair.second) = std::move(net);
            }
            pairs.push_back(std::move(pair));
        }
    }
    const ModelRiskResult r = model_risk_experiment(days, pairs, cfg);
    write_json(fs::path(o.outDir) / "modelrisk_summary.json", model_risk_summary(r));
    std::cout << std::left << std::setw(16) << "exotic" << std::setw(12) << "first" << std::setw(12) << "second"
              << std::setw(12) << "diff" << std::setw(12) << "sd diff" << "t(|diff| on X)\n"
              << std::fixed << std::setprecision(3);
    for (const auto& row : r.rows)
        std::cout << std::setw(16) << to_string(row.kind) << std::setw(12) << row.meanFirst << std::setw(12)
                  << row.meanSecond << std::setw(12) << row.meanDiff << std::setw(12) << row.sdDiff
                  << row.absDiffOnX.tSlope << '\n';
    return 0;
}

int run_sensitivity(const ExperimentOptions& o) {
    const ExoticKind kind = parse_exotic_kind(o.exotics.empty() ? "barrier" : o.exotics.front());
    ControlledConfig cfg = controlled_preset(parse_scale(o.scale));
    if (!o.config.empty()) from_json(read_json_file(o.config), cfg);
    cfg.seed = o.seed;
    if (o.rows) cfg.training.rows = o.rows;
    if (o.labelPaths) cfg.training.mc.numPaths = o.labelPaths;

    DatasetConfig data = cfg.training;
    data.sampler = cfg.sampler;
    VfaNetwork net;
    if (!o.weights.empty()) {
        net = load_network(o.weights);
        if (net.kind != kind && !o.exotics.empty()) throw ConfigError("--exotic does not match the weights file");
        data.mask = net.layout.mask();
    } else {
        data.seed = derive_seed(cfg.seed, stream_tag("training"));
        log("training a " + std::string(to_string(kind)) + " network on " + std::to_string(data.rows) + " rows");
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, stream_tag("train"));
        net = train_vfa(generate_training_set(data, kind), data.model, tc).network;
    }
    data.rows = o.panel;
    data.seed = derive_seed(cfg.seed, stream_tag("panel"));
    const auto panel = sample_feature_panel(data, net.kind);
    const SensitivityTable t = sensitivity_table(net, panel);
    write_json(fs::path(o.outDir) / "sensitivity_summary.json", sensitivity_summary(t, net.kind));
    std::cout << format_sensitivity_table(t);
    return 0;
}

int run_fit_surface(const FitOptions& o) {
    std::ifstream in(o.quotes);
    if (!in) throw ConfigError("cannot open " + o.quotes);
    const auto quotes = read_quotes_csv(in);
    if (quotes.empty()) throw ConfigError("quotes file has no rows");
    const SurfaceMask mask = parse_mask(o.mask);

    // Quotes outside the standard grid carry no information about its nodes.
    std::map<std::string, std::vector<OptionQuote>> byDate;
    std::size_t outside = 0;
    for (const auto& q : quotes) {
        if (q.inside_grid()) byDate[q.date].push_back(q);
        else ++outside;
    }
    if (outside) log("skipped " + std::to_string(outside) + " quotes outside the grid");
    if (byDate.empty()) throw ConfigError("no quote lies inside the grid");
    std::vector<SurfaceDay> days;
    for (const auto& [date, qs] : byDate) {
        const SurfaceFit fit = fit_surface(qs, mask);
        std::size_t flagged = 0;
        for (bool f : fit.flagged) flagged += f ? 1 : 0;
        if (flagged) log(date + ": " + std::to_string(flagged) + " nodes had no nearby quote");
        days.push_back({date, {qs.front().spot, o.rate, o.yield}, fit.surface});
    }
    auto out = open_out(o.out);
    write_surface_panel_csv(out, days);
    log("wrote " + std::to_string(days.size()) + " surfaces to " + o.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exotic option valuation: model calibration versus volatility-feature networks"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_help_all_flag("--help-all", "Print help for every command");
    unsigned threads = 1;
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

    DatagenOptions dg;
    auto* datagen = app.add_subcommand("datagen", "Generate a VFA training set (CSV + provenance JSON)");
    datagen->add_option("--config", dg.config, "DatasetConfig JSON")->check(CLI::ExistingFile);
    datagen->add_option("--model", dg.model, "heston | bates | lifted_heston")->capture_default_str();
    datagen->add_option("--exotic", dg.exotic, "knock_out_call (barrier) | knock_in_call | asian | lookback | european")
        ->required();
    datagen->add_option("--n", dg.rows, "Rows (default 4000)");
    datagen->add_option("--paths", dg.paths, "Monte Carlo paths per label (default 10000)");
    datagen->add_option("--mask", dg.mask, "full | snp19");
    datagen->add_option("--sampling", dg.sampling, "controlled | parity contract ranges");
    datagen->add_flag("--snp", dg.snp, "S&P-style initial and long-run vol sampling");
    datagen->add_option("--range", dg.ranges, "Override a sampler range, NAME=LO,HI (e.g. xi=0.1,0.8)");
    datagen->add_option("--seed", dg.seed, "Master seed")->capture_default_str();
    datagen->add_option("--out", dg.out, "Output CSV")->capture_default_str();

    TrainOptions tr;
    auto* trainCmd = app.add_subcommand("train", "Train a network on a datagen CSV");
    trainCmd->add_option("--data", tr.data, "Training CSV")->required()->check(CLI::ExistingFile);
    trainCmd->add_option("--config", tr.config, "TrainConfig JSON")->check(CLI::ExistingFile);
    trainCmd->add_option("--exotic", tr.exotic, "Exotic kind (default: from the provenance sidecar)");
    trainCmd->add_option("--model", tr.model, "Model family label (default: from the sidecar)");
    trainCmd->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
    trainCmd->add_option("--max-epochs", tr.maxEpochs, "Epoch cap (default 5000)");
    trainCmd->add_option("--out", tr.out, "Weights JSON")->capture_default_str();
    trainCmd->add_option("--history", tr.history, "Loss history CSV (default <out>.history.csv)");

    ExperimentOptions ex;
    auto* experiment = app.add_subcommand("experiment", "Run a study: controlled | parity | modelrisk | sensitivity");
    experiment->require_subcommand(1);
    auto common = [&](CLI::App* c) {
        c->add_option("--seed", ex.seed, "Master seed")->required();
        c->add_option("--scale", ex.scale,
                      "desk (n=50, N=4000, 10k paths, 100 days) or paper (n=1000, N=20000, 50k paths, 400k parity "
                      "rows, 4651 days)")
            ->capture_default_str();
        c->add_option("--config", ex.config, "Experiment config JSON (flags win)")->check(CLI::ExistingFile);
        c->add_option("--out-dir", ex.outDir, "Directory for reports")->capture_default_str();
    };
    auto* controlled = experiment->add_subcommand("controlled", "Bates scenarios: MCA vs VFA errors, Y regressed on X");
    common(controlled);
    controlled->add_option("--exotic", ex.exotics, "Exotic kind (default barrier)")->expected(1);
    controlled->add_option("--n", ex.n, "Scenarios");
    controlled->add_option("--N", ex.rows, "VFA training rows");
    controlled->add_option("--paths", ex.paths, "Scenario pricing paths");
    controlled->add_option("--label-paths", ex.labelPaths, "Training label paths");
    controlled->add_option("--weights", ex.weights, "Use a trained network")->check(CLI::ExistingFile);

    auto* parity = experiment->add_subcommand("parity", "Knock-in/knock-out parity gaps by maturity");
    common(parity);
    parity->add_option("--days", ex.days, "pseudo:N or a surface panel CSV")->capture_default_str();
    parity->add_option("--N", ex.rows, "VFA training rows");
    parity->add_option("--paths", ex.paths, "MCA pricing paths");
    parity->add_option("--label-paths", ex.labelPaths, "Training label paths");
    parity->add_option("--weights-ko", ex.weightsKo, "Knock-out network")->check(CLI::ExistingFile);
    parity->add_option("--weights-ki", ex.weightsKi, "Knock-in network")->check(CLI::ExistingFile);

    auto* modelrisk = experiment->add_subcommand("modelrisk", "Lifted Heston vs Bates network prices per day");
    common(modelrisk);
    modelrisk->add_option("--days", ex.days, "pseudo:N or a surface panel CSV")->capture_default_str();
    modelrisk->add_option("--exotic", ex.exotics, "Exotic kinds (default barrier asian lookback)");
    modelrisk->add_option("--N", ex.rows, "Training rows per network");
    modelrisk->add_option("--label-paths", ex.labelPaths, "Training label paths");
    modelrisk->add_option("--paths", ex.paths, "Lifted Heston surface paths");
    modelrisk->add_option("--weights-first", ex.weightsFirst, "First network")->check(CLI::ExistingFile);
    modelrisk->add_option("--weights-second", ex.weightsSecond, "Second network")->check(CLI::ExistingFile);

    auto* sens = experiment->add_subcommand("sensitivity", "Std of price sensitivity per surface point");
    common(sens);
    sens->add_option("--exotic", ex.exotics, "Exotic kind (default barrier)")->expected(1);
    sens->add_option("--weights", ex.weights, "Use a trained network")->check(CLI::ExistingFile);
    sens->add_option("--panel", ex.panel, "Sampled surfaces")->capture_default_str();
    sens->add_option("--N", ex.rows, "Training rows when no weights are given");
    sens->add_option("--label-paths", ex.labelPaths, "Training label paths");

    FitOptions fo;
    auto* fit = app.add_subcommand("fit-surface", "Fit standard-grid surfaces to quotes, one per date");
    fit->add_option("--quotes", fo.quotes, "CSV: date,T_years,strike,spot,implied_vol")
        ->required()
        ->check(CLI::ExistingFile);
    fit->add_option("--mask", fo.mask, "full | snp19")->capture_default_str();
    fit->add_option("--rate", fo.rate, "Risk-free rate stored with each day")->capture_default_str();
    fit->add_option("--yield", fo.yield, "Dividend yield stored with each day")->capture_default_str();
    fit->add_option("--out", fo.out, "Surface panel CSV")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        set_num_threads(threads);
        if (datagen->parsed()) return run_datagen(dg);
        if (trainCmd->parsed()) return run_train(tr);
        if (fit->parsed()) return run_fit_surface(fo);
        if (controlled->parsed()) return run_controlled(ex);
        if (parity->parsed()) return run_parity(ex);
        if (modelrisk->parsed()) return run_modelrisk(ex);
        if (sens->parsed()) return run_sensitivity(ex);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
