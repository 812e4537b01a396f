#include "exoval/dataset.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>

#include "csv.hpp"
#include "exoval/error.hpp"
#include "exoval/parallel.hpp"
#include "exoval/rng.hpp"

namespace exoval {

// FeatureLayout -----------------------------------------------------------------

FeatureLayout::FeatureLayout(SurfaceMask mask, bool barrier)
    : mask_(std::move(mask)), barrier_(barrier), volCount_(mask_.count()) {}

std::size_t FeatureLayout::barrier_index() const {
    if (!barrier_) throw ConfigError("layout has no barrier feature");
    return volCount_ + 2;
}

std::vector<std::size_t> FeatureLayout::vol_features() const {
    std::vector<std::size_t> idx(volCount_);
    for (std::size_t i = 0; i < volCount_; ++i) idx[i] = i;
    return idx;
}

std::vector<std::string> FeatureLayout::names() const {
    std::vector<std::string> n;
    for (std::size_t i = 1; i <= volCount_; ++i) n.push_back("v_" + std::to_string(i));
    n.push_back("T");
    n.push_back("k");
    if (barrier_) n.push_back("b");
    n.push_back("r");
    return n;
}

std::vector<double> FeatureLayout::features(const SurfaceGrid& surface, const ExoticSpec& spec,
                                            const MarketState& market) const {
    if (!(surface.mask == mask_)) throw ConfigError("surface mask does not match the feature layout");
    if (spec.barrier.has_value() != barrier_)
        throw ConfigError("contract barrier does not match the feature layout");
    std::vector<double> f = surface.active_vols();
    f.push_back(spec.maturity);
    f.push_back(spec.strike / market.spot);
    if (barrier_) f.push_back(*spec.barrier / market.spot);
    f.push_back(market.rate);
    return f;
}

void to_json(nlohmann::json& j, const FeatureLayout& l) {
    j = {{"mask", l.mask().name()}, {"barrier", l.has_barrier()}, {"names", l.names()}};
}

FeatureLayout layout_from_json(const nlohmann::json& j) {
    return FeatureLayout(parse_mask(j.at("mask").get<std::string>()), j.at("barrier").get<bool>());
}

// DatasetConfig -----------------------------------------------------------------

void DatasetConfig::validate() const {
    if (rows < 1) throw ConfigError("dataset needs at least one row");
    if (maxAttemptsPerRow < 1) throw ConfigError("maxAttemptsPerRow must be positive");
    if (!(maxFailureRate >= 0.0 && maxFailureRate < 1.0)) throw ConfigError("maxFailureRate must lie in [0, 1)");
    sampler.validate();
    mc.validate();
    surfaceMc.validate();
}

void to_json(nlohmann::json& j, const DatasetConfig& c) {
    j = {{"model", std::string(to_string(c.model))},
         {"rows", c.rows},
         {"sampler", c.sampler},
         {"mc", c.mc},
         {"surfaceMc", c.surfaceMc},
         {"mask", c.mask.name()},
         {"seed", c.seed},
         {"maxAttemptsPerRow", c.maxAttemptsPerRow},
         {"maxFailureRate", c.maxFailureRate}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
    if (j.contains("model")) c.model = parse_model_kind(j.at("model").get<std::string>());
    if (j.contains("rows")) c.rows = j.at("rows").get<std::size_t>();
    if (j.contains("sampler")) c.sampler = j.at("sampler").get<SamplerConfig>();
    if (j.contains("mc")) c.mc = j.at("mc").get<McConfig>();
    if (j.contains("surfaceMc")) c.surfaceMc = j.at("surfaceMc").get<McConfig>();
    if (j.contains("mask")) c.mask = parse_mask(j.at("mask").get<std::string>());
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("maxAttemptsPerRow")) c.maxAttemptsPerRow = j.at("maxAttemptsPerRow").get<int>();
    if (j.contains("maxFailureRate")) c.maxFailureRate = j.at("maxFailureRate").get<double>();
}

// Generation --------------------------------------------------------------------

namespace {

struct GeneratedRow {
    ModelDraw draw;
    ExoticSpec spec;  // sampled as a knock-out so the barrier is always drawn
    SurfaceGrid surface;
    std::vector<PriceEstimate> prices;
    std::uint64_t labelSeed = 0;
    int failures = 0;
};

std::optional<SurfaceGrid> build_surface(const ModelDraw& d, const SurfaceMask& mask, const McConfig& mc) {
    const auto nodes = try_model_surface(d.params, d.market, mask, mc);
    std::vector<double> active;
    for (std::size_t n : mask.active_nodes()) {
        if (!nodes[n] || !(*nodes[n] > 0.0 && *nodes[n] < 2.0)) return std::nullopt;
        active.push_back(*nodes[n]);
    }
    return SurfaceGrid::from_active_vols(mask, active);
}

// Draws model, market and contract for row i until the surface is valid.
void draw_row(const DatasetConfig& cfg, std::size_t i, GeneratedRow& row) {
    for (int attempt = 0;; ++attempt) {
        if (attempt == cfg.maxAttemptsPerRow)
            throw NumericError("row " + std::to_string(i) + ": no valid surface after " + std::to_string(attempt) +
                               " draws");
        Rng rng = substream(cfg.seed, i, static_cast<std::uint64_t>(attempt));
        row.draw = sample_model(cfg.sampler, cfg.model, rng);
        row.spec = sample_exotic(cfg.sampler, ExoticKind::knock_out_call, rng);
        McConfig smc = cfg.surfaceMc;
        smc.seed = derive_seed(cfg.seed, i, stream_tag("surface") + static_cast<std::uint64_t>(attempt));
        if (auto s = build_surface(row.draw, cfg.mask, smc)) {
            row.surface = *s;
            return;
        }
        ++row.failures;
    }
}

void check_failure_rate(const DatasetConfig& cfg, const std::vector<GeneratedRow>& rows, std::size_t& draws,
                        std::size_t& failures) {
    failures = 0;
    for (const auto& r : rows) failures += static_cast<std::size_t>(r.failures);
    draws = rows.size() + failures;
    if (static_cast<double>(failures) > cfg.maxFailureRate * static_cast<double>(draws))
        throw NumericError(std::to_string(failures) + " of " + std::to_string(draws) +
                           " draws produced an invalid surface; narrow the sampler ranges");
}

}  // namespace

std::vector<TrainingSet> generate_training_sets(const DatasetConfig& cfg, std::span<const ExoticKind> kinds) {
    cfg.validate();
    if (kinds.empty()) throw ConfigError("no exotic kinds requested");

    std::vector<GeneratedRow> rows(cfg.rows);
    parallel_for(cfg.rows, [&](std::size_t i) {
        GeneratedRow& row = rows[i];
        draw_row(cfg, i, row);
        std::vector<ExoticSpec> specs;
        for (ExoticKind k : kinds) specs.push_back(row.spec.with_kind(k));
        McConfig mc = cfg.mc;
        mc.commonPaths = true;
        mc.seed = row.labelSeed = derive_seed(cfg.seed, i, stream_tag("label"));
        row.prices = mc_price_many(row.draw.params, row.draw.market, specs, mc);
    });

    std::size_t draws = 0, failures = 0;
    check_failure_rate(cfg, rows, draws, failures);

    std::vector<TrainingSet> sets;
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        TrainingSet set;
        set.kind = kinds[k];
        set.layout = FeatureLayout::for_kind(cfg.mask, kinds[k]);
        for (const auto& r : rows) {
            const ExoticSpec spec = r.spec.with_kind(kinds[k]);
            const double scale = 100.0 / r.draw.market.spot;
            set.features.push_back(set.layout.features(r.surface, spec, r.draw.market));
            set.targets.push_back(r.prices[k].price * scale);
            set.sources.push_back({r.draw, spec, r.prices[k].stdError * scale, r.labelSeed});
        }
        set.provenance = {{"model", std::string(to_string(cfg.model))},
                          {"exotic", std::string(to_string(kinds[k]))},
                          {"layout", set.layout},
                          {"config", cfg},
                          {"draws", draws},
                          {"resampledDraws", failures}};
        sets.push_back(std::move(set));
    }
    return sets;
}

std::vector<std::vector<double>> sample_feature_panel(const DatasetConfig& cfg, ExoticKind kind) {
    cfg.validate();
    std::vector<GeneratedRow> rows(cfg.rows);
    parallel_for(cfg.rows, [&](std::size_t i) { draw_row(cfg, i, rows[i]); });
    std::size_t draws = 0, failures = 0;
    check_failure_rate(cfg, rows, draws, failures);
    const FeatureLayout layout = FeatureLayout::for_kind(cfg.mask, kind);
    std::vector<std::vector<double>> panel;
    for (const auto& r : rows) panel.push_back(layout.features(r.surface, r.spec.with_kind(kind), r.draw.market));
    return panel;
}

TrainingSet generate_training_set(const DatasetConfig& cfg, ExoticKind kind) {
    const ExoticKind kinds[] = {kind};
    return std::move(generate_training_sets(cfg, kinds).front());
}

// CSV ---------------------------------------------------------------------------

void write_training_csv(std::ostream& out, const TrainingSet& set) {
    for (const auto& n : set.layout.names()) out << n << ',';
    out << "price_pct\n" << std::setprecision(17);
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (double x : set.features[i]) out << x << ',';
        out << set.targets[i] << '\n';
    }
}

TrainingSet read_training_csv(std::istream& in, ExoticKind kind) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty training CSV");
    const auto header = csv::split(line);
    std::size_t vols = 0;
    while (vols < header.size() && header[vols] == "v_" + std::to_string(vols + 1)) ++vols;
    const SurfaceMask mask = vols == kGridNodes ? SurfaceMask::full()
                             : vols == SurfaceMask::snp19().count()
                                 ? SurfaceMask::snp19()
                                 : throw ConfigError("training CSV has " + std::to_string(vols) +
                                                     " vol columns; expected 25 or 19");
    TrainingSet set;
    set.kind = kind;
    set.layout = FeatureLayout::for_kind(mask, kind);
    auto expected = set.layout.names();
    expected.push_back("price_pct");
    if (header != expected)
        throw ConfigError("training CSV header does not match the " + std::string(to_string(kind)) + " layout");

    std::size_t lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (csv::trim(line).empty()) continue;
        const auto cells = csv::split(line);
        if (cells.size() != expected.size())
            throw ConfigError("line " + std::to_string(lineNo) + ": expected " + std::to_string(expected.size()) +
                              " columns");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(csv::to_double(c, lineNo));
        set.targets.push_back(row.back());
        row.pop_back();
        set.features.push_back(std::move(row));
    }
    if (set.features.empty()) throw ConfigError("training CSV has no rows");
    return set;
}

}  // namespace exoval
