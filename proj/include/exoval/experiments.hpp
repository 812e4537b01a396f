#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "exoval/calibration.hpp"
#include "exoval/dataset.hpp"
#include "exoval/mlp.hpp"

namespace exoval {

// OLS -----------------------------------------------------------------------------

struct OlsFit {
    double intercept = 0.0;
    double slope = 0.0;
    double tIntercept = 0.0;
    double tSlope = 0.0;
    std::size_t n = 0;
    bool infiniteT = false;  // zero residual variance
};

void to_json(nlohmann::json& j, const OlsFit& f);

// Least squares of y on x with an intercept. Throws ConfigError for n < 3 or
// a constant x.
OlsFit ols(std::span<const double> y, std::span<const double> x);

// VFA networks --------------------------------------------------------------------

// A trained surrogate together with the layout of its inputs.
struct VfaNetwork {
    Surrogate model;
    FeatureLayout layout;
    ExoticKind kind = ExoticKind::european_call;
    ModelKind family = ModelKind::heston;

    // Price as % of spot.
    double price_pct(const SurfaceGrid& surface, const ExoticSpec& spec, const MarketState& market) const;
};

void to_json(nlohmann::json& j, const VfaNetwork& n);
VfaNetwork vfa_from_json(const nlohmann::json& j);

struct VfaTraining {
    VfaNetwork network;
    TrainHistory history;
    std::size_t rows = 0;
};

// Trains on an existing set; metadata records kind, family, layout and seed.
VfaTraining train_vfa(const TrainingSet& set, ModelKind family, const TrainConfig& cfg);

// Scenario types ---------------------------------------------------------------

struct ExperimentRecord {
    std::string id;
    ModelParams trueParams = HestonParams{};
    MarketState market;
    ExoticSpec spec;
    double truePrice = 0.0;  // % of spot, as are all prices and errors below
    double trueStdError = 0.0;
    double X = 0.0;          // calibration error, vol units
    HestonParams calibrated;
    double mcaPrice = 0.0;
    double mcaStdError = 0.0;
    double vfaPrice = 0.0;
    double mcaError = 0.0;
    double vfaError = 0.0;
    double Y = 0.0;
};

// Controlled experiment --------------------------------------------------------

struct ControlledConfig {
    std::size_t scenarios = 50;  // n
    SamplerConfig sampler;       // scenario draws and VFA training draws
    McConfig mc;                 // true and calibrated-model exotic prices
    DatasetConfig training;      // N rows of the VFA training model
    TrainConfig train;
    CalibrationBudget calibration;
    std::uint64_t seed = 1;

    void validate() const;
};

void to_json(nlohmann::json& j, const ControlledConfig& c);
void from_json(const nlohmann::json& j, ControlledConfig& c);

struct ControlledResult {
    std::vector<ExperimentRecord> records;
    OlsFit fit;
    std::size_t excluded = 0;  // failed calibrations
    double vfaValidationMae = 0.0;
    std::size_t trainingRows = 0;
};

// Bates scenarios priced by calibrated Heston (MCA) and a Heston-trained
// network (VFA); Y = MCA error - VFA error is regressed on the calibration
// error X. True and MCA prices use common random numbers.
ControlledResult controlled_experiment(ExoticKind kind, const ControlledConfig& cfg);
// Same, with an already trained network.
ControlledResult controlled_experiment(ExoticKind kind, const ControlledConfig& cfg, const VfaNetwork& vfa);

// Pseudo-historical days -------------------------------------------------------

// One Bates surface per day on the given mask, drawn with the sampler (use
// snpStyle for S&P-like levels). Days whose surface fails are redrawn.
std::vector<SurfaceDay> pseudo_historical_days(std::size_t count, const SamplerConfig& sampler,
                                               const SurfaceMask& mask, std::uint64_t seed);

// Barrier parity ----------------------------------------------------------------

struct ParityConfig {
    SamplerConfig sampler;  // contract draws (parity buckets) and VFA training draws
    McConfig mc;
    DatasetConfig training;
    TrainConfig train;
    CalibrationBudget calibration;
    std::uint64_t seed = 1;

    void validate() const;
};

void to_json(nlohmann::json& j, const ParityConfig& c);
void from_json(const nlohmann::json& j, ParityConfig& c);

struct ParityNetworks {
    VfaNetwork knockOut;
    VfaNetwork knockIn;
};

// Both networks trained on one set of shared draws.
ParityNetworks train_parity_networks(const ParityConfig& cfg);

struct ParityRecord {
    std::string day;
    ExoticSpec spec;  // the knock-out contract
    double spot = 0.0;
    double vanilla = 0.0;  // % of spot, from the interpolated vol
    double X = 0.0;
    double mcaKnockOut = 0.0;
    double mcaKnockIn = 0.0;
    double vfaKnockOut = 0.0;
    double vfaKnockIn = 0.0;
    double mcaGap = 0.0;  // |KO + KI - V|, % of spot
    double vfaGap = 0.0;
};

struct ParityBucketRow {
    double maturity = 0.0;  // 0 marks the full sample
    double mcaMae = 0.0;
    double vfaMae = 0.0;
    std::size_t count = 0;
};

struct ParityResult {
    std::vector<ParityRecord> records;
    std::vector<ParityBucketRow> table;  // one row per maturity, then the full sample
    std::size_t excludedDays = 0;
    std::vector<std::string> excludedIds;
};

ParityResult parity_experiment(std::span<const SurfaceDay> days, const ParityConfig& cfg, const ParityNetworks& nets);

// Model risk --------------------------------------------------------------------

struct ModelRiskConfig {
    SamplerConfig sampler;  // contract draws
    CalibrationBudget calibration;
    std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const ModelRiskConfig& c);
void from_json(const nlohmann::json& j, ModelRiskConfig& c);

struct ModelRiskPair {
    VfaNetwork first;   // e.g. lifted Heston
    VfaNetwork second;  // e.g. Bates
};

struct ModelRiskRow {
    ExoticKind kind = ExoticKind::knock_out_call;
    double meanFirst = 0.0;
    double meanSecond = 0.0;
    double meanDiff = 0.0;  // first - second
    double sdDiff = 0.0;
    OlsFit absDiffOnX;
    std::size_t n = 0;
};

struct ModelRiskResult {
    std::vector<ModelRiskRow> rows;
    std::vector<double> dayX;
    std::size_t excludedDays = 0;
};

ModelRiskResult model_risk_experiment(std::span<const SurfaceDay> days, std::span<const ModelRiskPair> pairs,
                                      const ModelRiskConfig& cfg);

// Sensitivity -------------------------------------------------------------------

struct SensitivityTable {
    std::array<std::optional<double>, kGridNodes> stdDev;  // empty for inactive or undefined points
    std::array<bool, kGridNodes> undefined{};              // zero mean gradient
    std::size_t panelSize = 0;
    bool singleSample = false;  // std of one value reported as 0
};

// Sample standard deviation over the panel of s(v_i) for every surface point.
SensitivityTable sensitivity_table(const VfaNetwork& net, const std::vector<std::vector<double>>& panel);

// Reports -----------------------------------------------------------------------

void write_records_csv(std::ostream& out, std::span<const ExperimentRecord> records);
void write_scatter_dat(std::ostream& out, std::span<const ExperimentRecord> records);
nlohmann::json controlled_summary(ExoticKind kind, const ControlledResult& r);

void write_parity_csv(std::ostream& out, std::span<const ParityRecord> records);
nlohmann::json parity_summary(const ParityResult& r);

nlohmann::json model_risk_summary(const ModelRiskResult& r);

nlohmann::json sensitivity_summary(const SensitivityTable& t, ExoticKind kind);
// Moneyness rows by maturity columns; blanks for inactive points.
std::string format_sensitivity_table(const SensitivityTable& t);

// Preset scales ----------------------------------------------------------------

enum class Scale { desk, paper };
Scale parse_scale(std::string_view name);

ControlledConfig controlled_preset(Scale s);
ParityConfig parity_preset(Scale s);
std::size_t pseudo_day_preset(Scale s);

}  // namespace exoval
