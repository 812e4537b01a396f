#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "exoval/exotic.hpp"
#include "exoval/market_models.hpp"
#include "exoval/pricing_mc.hpp"
#include "exoval/surface.hpp"

namespace exoval {

// Network inputs: active surface vols in node order, then T, k = K/S,
// b = B/S (barrier kinds only) and r. Model parameters are never features.
class FeatureLayout {
public:
    FeatureLayout() : FeatureLayout(SurfaceMask::full(), false) {}
    FeatureLayout(SurfaceMask mask, bool barrier);
    static FeatureLayout for_kind(const SurfaceMask& mask, ExoticKind kind) {
        return FeatureLayout(mask, is_barrier(kind));
    }

    const SurfaceMask& mask() const { return mask_; }
    bool has_barrier() const { return barrier_; }
    std::size_t vol_count() const { return volCount_; }
    std::size_t size() const { return volCount_ + (barrier_ ? 4 : 3); }
    std::size_t maturity_index() const { return volCount_; }
    std::size_t moneyness_index() const { return volCount_ + 1; }
    std::size_t barrier_index() const;
    std::size_t rate_index() const { return size() - 1; }
    std::vector<std::size_t> vol_features() const;
    std::vector<std::string> names() const;

    // Throws ConfigError if the surface mask differs from the layout's or the
    // barrier presence does not match.
    std::vector<double> features(const SurfaceGrid& surface, const ExoticSpec& spec, const MarketState& market) const;

    bool operator==(const FeatureLayout& o) const { return mask_ == o.mask_ && barrier_ == o.barrier_; }

private:
    SurfaceMask mask_;
    bool barrier_;
    std::size_t volCount_;
};

void to_json(nlohmann::json& j, const FeatureLayout& l);
FeatureLayout layout_from_json(const nlohmann::json& j);

struct DatasetConfig {
    ModelKind model = ModelKind::heston;
    std::size_t rows = 4000;
    SamplerConfig sampler;
    McConfig mc;         // exotic labels; seeds are derived per row
    McConfig surfaceMc;  // lifted-Heston surfaces only
    SurfaceMask mask = SurfaceMask::full();
    std::uint64_t seed = 1;
    int maxAttemptsPerRow = 20;
    double maxFailureRate = 0.10;

    void validate() const;
};

void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

// Everything behind one emitted row; kept in memory, not in the CSV.
struct RowSource {
    ModelDraw draw;
    ExoticSpec spec;
    double stdError = 0.0;  // label standard error, % of spot
    std::uint64_t labelSeed = 0;
};

struct TrainingSet {
    FeatureLayout layout;
    ExoticKind kind = ExoticKind::european_call;
    std::vector<std::vector<double>> features;
    std::vector<double> targets;  // price as % of spot
    std::vector<RowSource> sources;
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t size() const { return targets.size(); }
};

// Row i draws its model, market and contract from substream (seed, i, attempt)
// and is labelled by Monte Carlo with its own derived seed, so the set does
// not depend on the thread count. Rows whose surface cannot be built are
// redrawn. Throws NumericError when redraws exceed maxFailureRate of all draws.
TrainingSet generate_training_set(const DatasetConfig& cfg, ExoticKind kind);

// One set per kind from shared draws: every row has the same model, surface,
// maturity and strike across kinds and all kinds are priced on one path set.
std::vector<TrainingSet> generate_training_sets(const DatasetConfig& cfg, std::span<const ExoticKind> kinds);

// Feature vectors drawn exactly as generate_training_set draws them, without
// pricing. Uses cfg.rows draws.
std::vector<std::vector<double>> sample_feature_panel(const DatasetConfig& cfg, ExoticKind kind);

// CSV with header v_1..v_m,T,k[,b],r,price_pct.
void write_training_csv(std::ostream& out, const TrainingSet& set);
// Reads rows written by write_training_csv. The mask is inferred from the
// number of vol columns (25 or 19); a b column must be present exactly for
// barrier kinds.
TrainingSet read_training_csv(std::istream& in, ExoticKind kind);

}  // namespace exoval
