#include "exoval/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "exoval/black_scholes.hpp"
#include "exoval/error.hpp"
#include "exoval/parallel.hpp"
#include "exoval/rng.hpp"

namespace exoval {

namespace {

template <class T>
void get(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

double mean(std::span<const double> x) {
    return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

}  // namespace

// OLS -----------------------------------------------------------------------------

void to_json(nlohmann::json& j, const OlsFit& f) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    };
    j = {{"intercept", f.intercept}, {"slope", f.slope},         {"tIntercept", num(f.tIntercept)},
         {"tSlope", num(f.tSlope)},  {"n", f.n},                 {"infiniteT", f.infiniteT}};
}

OlsFit ols(std::span<const double> y, std::span<const double> x) {
    if (y.size() != x.size()) throw ConfigError("ols: x and y differ in length");
    const std::size_t n = x.size();
    if (n < 3) throw ConfigError("ols needs at least 3 points");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    double scale = 0.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    if (!(sxx > 1e-24 * scale * scale * static_cast<double>(n))) throw ConfigError("ols: x is constant");

    OlsFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - f.intercept - f.slope * x[i];
        ssr += e * e;
    }
    const double s2 = ssr / static_cast<double>(n - 2);
    const double seSlope = std::sqrt(s2 / sxx);
    const double seIntercept = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
    auto tstat = [](double coef, double se) {
        if (se > 0.0) return coef / se;
        return coef == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), coef);
    };
    f.infiniteT = !(ssr > 1e-26 * std::max(syy, std::numeric_limits<double>::min()));
    if (f.infiniteT) {
        f.tSlope = tstat(f.slope, 0.0);
        f.tIntercept = tstat(f.intercept, 0.0);
    } else {
        f.tSlope = tstat(f.slope, seSlope);
        f.tIntercept = tstat(f.intercept, seIntercept);
    }
    return f;
}

// VFA networks --------------------------------------------------------------------

double VfaNetwork::price_pct(const SurfaceGrid& surface, const ExoticSpec& spec, const MarketState& market) const {
    if (spec.kind != kind)
        throw ConfigError("network prices " + std::string(to_string(kind)) + ", not " +
                          std::string(to_string(spec.kind)));
    return model.predict(layout.features(surface, spec, market));
}

void to_json(nlohmann::json& j, const VfaNetwork& n) {
    j = n.model;
    j["metadata"]["exotic"] = std::string(to_string(n.kind));
    j["metadata"]["model"] = std::string(to_string(n.family));
    j["metadata"]["layout"] = n.layout;
}

VfaNetwork vfa_from_json(const nlohmann::json& j) {
    VfaNetwork n;
    n.model = j.get<Surrogate>();
    const auto& meta = n.model.metadata;
    if (!meta.contains("exotic") || !meta.contains("layout"))
        throw ConfigError("weights file lacks exotic kind or feature layout metadata");
    n.kind = parse_exotic_kind(meta.at("exotic").get<std::string>());
    n.family = parse_model_kind(meta.value("model", std::string("heston")));
    n.layout = layout_from_json(meta.at("layout"));
    if (n.layout.size() != n.model.net.inputs()) throw ConfigError("weights file: layout and network sizes differ");
    if (n.layout.has_barrier() != is_barrier(n.kind)) throw ConfigError("weights file: layout does not fit the kind");
    return n;
}

VfaTraining train_vfa(const TrainingSet& set, ModelKind family, const TrainConfig& cfg) {
    TrainResult tr = train(set.features, set.targets, cfg);
    VfaTraining out;
    out.network.model = std::move(tr.model);
    out.network.layout = set.layout;
    out.network.kind = set.kind;
    out.network.family = family;
    out.network.model.metadata = {{"exotic", std::string(to_string(set.kind))},
                                  {"model", std::string(to_string(family))},
                                  {"layout", set.layout},
                                  {"trainingSeed", cfg.seed},
                                  {"rows", set.size()},
                                  {"bestEpoch", tr.history.bestEpoch},
                                  {"validationMae", tr.history.bestValLoss}};
    out.history = std::move(tr.history);
    out.rows = set.size();
    return out;
}

// Configs -----------------------------------------------------------------------

void ControlledConfig::validate() const {
    if (scenarios < 3) throw ConfigError("controlled experiment needs at least 3 scenarios");
    sampler.validate();
    mc.validate();
    training.validate();
    train.validate();
    calibration.validate();
}

void to_json(nlohmann::json& j, const ControlledConfig& c) {
    j = {{"scenarios", c.scenarios}, {"sampler", c.sampler},         {"mc", c.mc},     {"training", c.training},
         {"train", c.train},         {"calibration", c.calibration}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ControlledConfig& c) {
    get(j, "scenarios", c.scenarios);
    get(j, "sampler", c.sampler);
    get(j, "mc", c.mc);
    get(j, "training", c.training);
    get(j, "train", c.train);
    get(j, "calibration", c.calibration);
    get(j, "seed", c.seed);
}

void ParityConfig::validate() const {
    sampler.validate();
    mc.validate();
    training.validate();
    train.validate();
    calibration.validate();
}

void to_json(nlohmann::json& j, const ParityConfig& c) {
    j = {{"sampler", c.sampler}, {"mc", c.mc},         {"training", c.training}, {"train", c.train},
         {"calibration", c.calibration}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ParityConfig& c) {
    get(j, "sampler", c.sampler);
    get(j, "mc", c.mc);
    get(j, "training", c.training);
    get(j, "train", c.train);
    get(j, "calibration", c.calibration);
    get(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const ModelRiskConfig& c) {
    j = {{"sampler", c.sampler}, {"calibration", c.calibration}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelRiskConfig& c) {
    get(j, "sampler", c.sampler);
    get(j, "calibration", c.calibration);
    get(j, "seed", c.seed);
}

// Controlled experiment --------------------------------------------------------

ControlledResult controlled_experiment(ExoticKind kind, const ControlledConfig& cfg) {
    cfg.validate();
    DatasetConfig data = cfg.training;
    data.sampler = cfg.sampler;
    data.seed = derive_seed(cfg.seed, stream_tag("training"));
    const TrainingSet set = generate_training_set(data, kind);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, stream_tag("train"));
    const VfaTraining vt = train_vfa(set, data.model, tc);

    ControlledResult r = controlled_experiment(kind, cfg, vt.network);
    r.vfaValidationMae = vt.history.bestValLoss;
    r.trainingRows = vt.rows;
    return r;
}

ControlledResult controlled_experiment(ExoticKind kind, const ControlledConfig& cfg, const VfaNetwork& vfa) {
    cfg.validate();
    if (vfa.kind != kind) throw ConfigError("network kind does not match the experiment");
    if (!(vfa.layout.mask() == SurfaceMask::full())) throw ConfigError("controlled experiment uses full surfaces");

    std::vector<std::optional<ExperimentRecord>> slots(cfg.scenarios);
    parallel_for(cfg.scenarios, [&](std::size_t s) {
        Rng rng = substream(cfg.seed, stream_tag("scenario"), s);
        const ModelDraw draw = sample_model(cfg.sampler, ModelKind::bates, rng);
        const ExoticSpec spec = sample_exotic(cfg.sampler, kind, rng);
        SurfaceGrid surface;
        try {
            surface = model_surface(draw.params, draw.market, SurfaceMask::full());
        } catch (const std::runtime_error&) {
            return;
        }
        const CalibrationResult cal = calibrate(surface, draw.market, cfg.calibration);
        if (!cal.converged) return;

        McConfig mc = cfg.mc;
        mc.seed = derive_seed(cfg.seed, stream_tag("price"), s);
        const double scale = 100.0 / draw.market.spot;
        const PriceEstimate truth = mc_price(draw.params, draw.market, spec, mc);
        const PriceEstimate mca = mc_price(cal.params, draw.market, spec, mc);

        ExperimentRecord rec;
        rec.id = "scenario-" + std::to_string(s);
        rec.trueParams = draw.params;
        rec.market = draw.market;
        rec.spec = spec;
        rec.truePrice = truth.price * scale;
        rec.trueStdError = truth.stdError * scale;
        rec.X = cal.error;
        rec.calibrated = cal.params;
        rec.mcaPrice = mca.price * scale;
        rec.mcaStdError = mca.stdError * scale;
        rec.vfaPrice = vfa.price_pct(surface, spec, draw.market);
        rec.mcaError = std::abs(rec.mcaPrice - rec.truePrice);
        rec.vfaError = std::abs(rec.vfaPrice - rec.truePrice);
        rec.Y = rec.mcaError - rec.vfaError;
        slots[s] = std::move(rec);
    });

    ControlledResult r;
    for (auto& s : slots) {
        if (s) r.records.push_back(std::move(*s));
        else ++r.excluded;
    }
    if (r.records.size() < 3)
        throw NumericError("only " + std::to_string(r.records.size()) + " scenarios calibrated successfully");
    std::vector<double> X, Y;
    for (const auto& rec : r.records) {
        X.push_back(rec.X);
        Y.push_back(rec.Y);
    }
    r.fit = ols(Y, X);
    return r;
}

// Pseudo-historical days -------------------------------------------------------

std::vector<SurfaceDay> pseudo_historical_days(std::size_t count, const SamplerConfig& sampler,
                                               const SurfaceMask& mask, std::uint64_t seed) {
    sampler.validate();
    constexpr int kMaxAttempts = 20;
    std::vector<SurfaceDay> days(count);
    parallel_for(count, [&](std::size_t d) {
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            Rng rng = substream(seed, stream_tag("day") + d, static_cast<std::uint64_t>(attempt));
            const ModelDraw draw = sample_model(sampler, ModelKind::bates, rng);
            try {
                days[d].surface = model_surface(draw.params, draw.market, mask);
            } catch (const std::runtime_error&) {
                continue;
            }
            std::ostringstream id;
            id << "pseudo-" << std::setw(4) << std::setfill('0') << d;
            days[d].id = id.str();
            days[d].market = draw.market;
            return;
        }
        throw NumericError("pseudo day " + std::to_string(d) + ": no valid surface");
    });
    return days;
}

// Barrier parity ----------------------------------------------------------------

ParityNetworks train_parity_networks(const ParityConfig& cfg) {
    cfg.validate();
    DatasetConfig data = cfg.training;
    data.sampler = cfg.sampler;
    data.seed = derive_seed(cfg.seed, stream_tag("training"));
    const ExoticKind kinds[] = {ExoticKind::knock_out_call, ExoticKind::knock_in_call};
    const auto sets = generate_training_sets(data, kinds);
    ParityNetworks nets;
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, stream_tag("train-ko"));
    nets.knockOut = train_vfa(sets[0], data.model, tc).network;
    tc.seed = derive_seed(cfg.seed, stream_tag("train-ki"));
    nets.knockIn = train_vfa(sets[1], data.model, tc).network;
    return nets;
}

ParityResult parity_experiment(std::span<const SurfaceDay> days, const ParityConfig& cfg, const ParityNetworks& nets) {
    cfg.validate();
    if (nets.knockOut.kind != ExoticKind::knock_out_call || nets.knockIn.kind != ExoticKind::knock_in_call)
        throw ConfigError("parity needs a knock-out and a knock-in network");
    for (const auto& day : days)
        if (!(day.surface.mask == nets.knockOut.layout.mask()) || !(day.surface.mask == nets.knockIn.layout.mask()))
            throw ConfigError("day " + day.id + ": surface mask does not match the networks");

    std::vector<std::optional<ParityRecord>> slots(days.size());
    parallel_for(days.size(), [&](std::size_t d) {
        const SurfaceDay& day = days[d];
        const MarketState& m = day.market;
        SamplerConfig sc = cfg.sampler;
        sc.spot = m.spot;
        sc.exoticSampling = ExoticSampling::parity;
        Rng rng = substream(cfg.seed, stream_tag("parity"), d);
        const ExoticSpec ko = sample_exotic(sc, ExoticKind::knock_out_call, rng);
        const ExoticSpec ki = ko.with_kind(ExoticKind::knock_in_call);
        const double scale = 100.0 / m.spot;

        ParityRecord rec;
        rec.day = day.id;
        rec.spec = ko;
        rec.spot = m.spot;
        const double vol = interpolate(day.surface, ko.strike, ko.maturity, m.spot);
        rec.vanilla = bs_call(m.spot, ko.strike, m.rate, m.yield, ko.maturity, vol) * scale;

        const CalibrationResult cal = calibrate(day.surface, m, cfg.calibration);
        if (!cal.converged) return;
        rec.X = cal.error;
        McConfig mc = cfg.mc;
        mc.commonPaths = true;
        mc.seed = derive_seed(cfg.seed, stream_tag("parity-mc"), d);
        const ExoticSpec specs[] = {ko, ki};
        const auto mca = mc_price_many(cal.params, m, specs, mc);
        rec.mcaKnockOut = mca[0].price * scale;
        rec.mcaKnockIn = mca[1].price * scale;
        rec.vfaKnockOut = nets.knockOut.price_pct(day.surface, ko, m);
        rec.vfaKnockIn = nets.knockIn.price_pct(day.surface, ki, m);
        rec.mcaGap = std::abs(rec.mcaKnockOut + rec.mcaKnockIn - rec.vanilla);
        rec.vfaGap = std::abs(rec.vfaKnockOut + rec.vfaKnockIn - rec.vanilla);
        slots[d] = rec;
    });

    ParityResult r;
    for (std::size_t d = 0; d < slots.size(); ++d) {
        if (slots[d]) {
            r.records.push_back(*slots[d]);
        } else {
            ++r.excludedDays;
            r.excludedIds.push_back(days[d].id);
        }
    }
    std::map<double, ParityBucketRow> buckets;
    ParityBucketRow full;
    for (const auto& rec : r.records) {
        ParityBucketRow& b = buckets[rec.spec.maturity];
        b.maturity = rec.spec.maturity;
        for (ParityBucketRow* row : {&b, &full}) {
            row->mcaMae += rec.mcaGap;
            row->vfaMae += rec.vfaGap;
            ++row->count;
        }
    }
    for (auto& [T, b] : buckets) r.table.push_back(b);
    r.table.push_back(full);
    for (auto& row : r.table)
        if (row.count > 0) {
            row.mcaMae /= static_cast<double>(row.count);
            row.vfaMae /= static_cast<double>(row.count);
        }
    return r;
}

// Model risk --------------------------------------------------------------------

ModelRiskResult model_risk_experiment(std::span<const SurfaceDay> days, std::span<const ModelRiskPair> pairs,
                                      const ModelRiskConfig& cfg) {
    cfg.sampler.validate();
    cfg.calibration.validate();
    if (days.empty()) throw ConfigError("model risk needs at least one day");
    for (const auto& p : pairs) {
        if (p.first.kind != p.second.kind) throw ConfigError("model risk pair prices different exotics");
        if (!(p.first.layout == p.second.layout)) throw ConfigError("model risk pair uses different layouts");
    }

    std::vector<std::optional<double>> X(days.size());
    parallel_for(days.size(), [&](std::size_t d) {
        const CalibrationResult cal = calibrate(days[d].surface, days[d].market, cfg.calibration);
        if (cal.converged) X[d] = cal.error;
    });

    ModelRiskResult r;
    std::vector<std::size_t> kept;
    for (std::size_t d = 0; d < days.size(); ++d) {
        if (X[d]) {
            kept.push_back(d);
            r.dayX.push_back(*X[d]);
        } else {
            ++r.excludedDays;
        }
    }

    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const ModelRiskPair& pair = pairs[p];
        std::vector<double> a, b, diff, absDiff;
        for (std::size_t d : kept) {
            const MarketState& m = days[d].market;
            SamplerConfig sc = cfg.sampler;
            sc.spot = m.spot;
            Rng rng = substream(cfg.seed, stream_tag("modelrisk") + d, p);
            const ExoticSpec spec = sample_exotic(sc, pair.first.kind, rng);
            a.push_back(pair.first.price_pct(days[d].surface, spec, m));
            b.push_back(pair.second.price_pct(days[d].surface, spec, m));
            diff.push_back(a.back() - b.back());
            absDiff.push_back(std::abs(diff.back()));
        }
        ModelRiskRow row;
        row.kind = pair.first.kind;
        row.n = kept.size();
        row.meanFirst = mean(a);
        row.meanSecond = mean(b);
        row.meanDiff = mean(diff);
        row.sdDiff = sample_sd(diff);
        if (kept.size() >= 3) row.absDiffOnX = ols(absDiff, r.dayX);
        r.rows.push_back(row);
    }
    return r;
}

// Sensitivity -------------------------------------------------------------------

SensitivityTable sensitivity_table(const VfaNetwork& net, const std::vector<std::vector<double>>& panel) {
    const auto volFeatures = net.layout.vol_features();
    const SensitivityMatrix s = sensitivity(net.model, panel, volFeatures);
    const auto nodes = net.layout.mask().active_nodes();
    SensitivityTable t;
    t.panelSize = panel.size();
    t.singleSample = panel.size() == 1;
    for (std::size_t i = 0; i < volFeatures.size(); ++i) {
        if (s.undefined[i]) {
            t.undefined[nodes[i]] = true;
            continue;
        }
        std::vector<double> column;
        for (const auto& row : s.values) column.push_back(row[i]);
        t.stdDev[nodes[i]] = sample_sd(column);
    }
    return t;
}

// Reports -----------------------------------------------------------------------

void write_records_csv(std::ostream& out, std::span<const ExperimentRecord> records) {
    out << "id,exotic,T,K,B,spot,rate,V0,a,VL,xi,rho,lambda,mu,sigma,truePrice,trueStdError,X,"
           "cal_V0,cal_a,cal_VL,cal_xi,cal_rho,mcaPrice,mcaStdError,vfaPrice,mcaError,vfaError,Y\n"
        << std::setprecision(17);
    for (const auto& r : records) {
        const HestonParams& h = heston_part(r.trueParams);
        double lambda = 0.0, mu = 0.0, sigma = 0.0;
        if (const auto* b = std::get_if<BatesParams>(&r.trueParams)) lambda = b->lambda, mu = b->muJ, sigma = b->sigmaJ;
        out << r.id << ',' << to_string(r.spec.kind) << ',' << r.spec.maturity << ',' << r.spec.strike << ','
            << (r.spec.barrier ? *r.spec.barrier : 0.0) << ',' << r.market.spot << ',' << r.market.rate << ','
            << h.v0 << ',' << h.a << ',' << h.vL << ',' << h.xi << ',' << h.rho << ',' << lambda << ',' << mu << ','
            << sigma << ',' << r.truePrice << ',' << r.trueStdError << ',' << r.X << ',' << r.calibrated.v0 << ','
            << r.calibrated.a << ',' << r.calibrated.vL << ',' << r.calibrated.xi << ',' << r.calibrated.rho << ','
            << r.mcaPrice << ',' << r.mcaStdError << ',' << r.vfaPrice << ',' << r.mcaError << ',' << r.vfaError
            << ',' << r.Y << '\n';
    }
}

void write_scatter_dat(std::ostream& out, std::span<const ExperimentRecord> records) {
    out << "# X(calibration error, vol) Y(MCA error - VFA error, % of spot)\n" << std::setprecision(17);
    for (const auto& r : records) out << r.X << ' ' << r.Y << '\n';
}

nlohmann::json controlled_summary(ExoticKind kind, const ControlledResult& r) {
    std::vector<double> X, Y, mcaE, vfaE;
    for (const auto& rec : r.records) {
        X.push_back(rec.X);
        Y.push_back(rec.Y);
        mcaE.push_back(rec.mcaError);
        vfaE.push_back(rec.vfaError);
    }
    // Same regression with X in vol points (X * 100).
    OlsFit points = r.fit;
    points.slope /= 100.0;
    return {{"exotic", std::string(to_string(kind))},
            {"scenarios", r.records.size() + r.excluded},
            {"used", r.records.size()},
            {"excluded", r.excluded},
            {"ols", r.fit},
            {"olsXInVolPoints", points},
            {"meanX", mean(X)},
            {"meanY", mean(Y)},
            {"meanMcaError", mean(mcaE)},
            {"meanVfaError", mean(vfaE)},
            {"vfaValidationMae", r.vfaValidationMae},
            {"trainingRows", r.trainingRows}};
}

void write_parity_csv(std::ostream& out, std::span<const ParityRecord> records) {
    out << "day,T,K,B,spot,vanilla,X,mcaKO,mcaKI,vfaKO,vfaKI,mcaGap,vfaGap\n" << std::setprecision(17);
    for (const auto& r : records)
        out << r.day << ',' << r.spec.maturity << ',' << r.spec.strike << ',' << *r.spec.barrier << ',' << r.spot
            << ',' << r.vanilla << ',' << r.X << ',' << r.mcaKnockOut << ',' << r.mcaKnockIn << ',' << r.vfaKnockOut
            << ',' << r.vfaKnockIn << ',' << r.mcaGap << ',' << r.vfaGap << '\n';
}

nlohmann::json parity_summary(const ParityResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& b : r.table) {
        nlohmann::json row = {{"mcaMae", b.mcaMae}, {"vfaMae", b.vfaMae}, {"sampleSize", b.count}};
        if (b.maturity > 0.0) row["T"] = b.maturity;
        else row["T"] = "Full Sample";
        rows.push_back(row);
    }
    return {{"table", rows}, {"excludedDays", r.excludedDays}, {"excludedIds", r.excludedIds}, {"units", "% of spot"}};
}

nlohmann::json model_risk_summary(const ModelRiskResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"exotic", std::string(to_string(row.kind))},
                        {"meanFirstPrice", row.meanFirst},
                        {"meanSecondPrice", row.meanSecond},
                        {"meanDiff", row.meanDiff},
                        {"sdDiff", row.sdDiff},
                        {"absDiffOnX", row.absDiffOnX},
                        {"n", row.n}});
    return {{"rows", rows}, {"excludedDays", r.excludedDays}, {"units", "% of spot"}};
}

nlohmann::json sensitivity_summary(const SensitivityTable& t, ExoticKind kind) {
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t j = 0; j < kGridMoneyness; ++j) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t i = 0; i < kGridMaturities; ++i) {
            const auto& v = t.stdDev[node_index(i, j)];
            row.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
        }
        grid.push_back(row);
    }
    std::vector<int> undefined;
    for (std::size_t n = 0; n < kGridNodes; ++n)
        if (t.undefined[n]) undefined.push_back(static_cast<int>(n));
    return {{"exotic", std::string(to_string(kind))},
            {"maturities", kMaturities},
            {"moneyness", kMoneyness},
            {"stdDev", grid},
            {"undefinedNodes", undefined},
            {"panelSize", t.panelSize},
            {"singleSample", t.singleSample}};
}

std::string format_sensitivity_table(const SensitivityTable& t) {
    static const char* labels[] = {"1 month", "3 months", "6 months", "1 year", "2 years"};
    std::ostringstream out;
    out << std::left << std::setw(10) << "";
    for (const char* l : labels) out << std::setw(10) << l;
    out << '\n' << std::fixed << std::setprecision(2);
    for (std::size_t j = 0; j < kGridMoneyness; ++j) {
        std::ostringstream k;
        k << std::fixed << std::setprecision(2) << "K=" << kMoneyness[j] << "S";
        out << std::setw(10) << k.str();
        for (std::size_t i = 0; i < kGridMaturities; ++i) {
            const auto& v = t.stdDev[node_index(i, j)];
            if (v) {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(2) << *v;
                out << std::setw(10) << cell.str();
            } else {
                out << std::setw(10) << "";
            }
        }
        out << '\n';
    }
    return out.str();
}

// Presets -----------------------------------------------------------------------

Scale parse_scale(std::string_view name) {
    if (name == "desk") return Scale::desk;
    if (name == "paper") return Scale::paper;
    throw ConfigError("scale must be 'desk' or 'paper', got '" + std::string(name) + "'");
}

ControlledConfig controlled_preset(Scale s) {
    ControlledConfig c;
    c.training.model = ModelKind::heston;
    c.training.mask = SurfaceMask::full();
    if (s == Scale::desk) {
        c.scenarios = 50;
        c.training.rows = 4000;
        c.mc.numPaths = 10000;
        c.training.mc.numPaths = 10000;
    } else {
        c.scenarios = 1000;
        c.training.rows = 20000;
        c.mc.numPaths = 50000;
        c.training.mc.numPaths = 50000;
    }
    return c;
}

ParityConfig parity_preset(Scale s) {
    ParityConfig c;
    c.sampler.snpStyle = true;
    c.sampler.exoticSampling = ExoticSampling::parity;
    c.training.model = ModelKind::heston;
    c.training.mask = SurfaceMask::snp19();
    c.mc.numPaths = 10000;
    if (s == Scale::desk) {
        c.training.rows = 4000;
        c.training.mc.numPaths = 10000;
    } else {
        c.training.rows = 400000;
        c.training.mc.numPaths = 50000;
    }
    return c;
}

std::size_t pseudo_day_preset(Scale s) { return s == Scale::desk ? 100 : 4651; }

}  // namespace exoval
