#pragma once

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "exoval/exotic.hpp"
#include "exoval/rng.hpp"

namespace exoval {

struct MarketState {
    double spot = 100.0;
    double rate = 0.0;   // continuously compounded
    double yield = 0.0;  // asset yield

    void validate() const;
};

struct HestonParams {
    double v0 = 0.04;   // initial variance
    double a = 1.0;     // mean-reversion speed
    double vL = 0.04;   // long-run variance
    double xi = 0.3;    // vol of vol
    double rho = -0.5;

    void validate() const;
};

// Heston variance plus compound-Poisson jumps with ln(1+k) ~ N(muJ, sigmaJ^2).
struct BatesParams {
    HestonParams heston;
    double lambda = 0.0;
    double muJ = 0.0;
    double sigmaJ = 0.0;

    void validate() const;
};

struct LiftedWeights {
    std::vector<double> c;  // factor weights
    std::vector<double> x;  // mean-reversion speeds, strictly increasing
};

// Closed-form weights and speeds of the n-factor lift with alpha = H + 1/2.
// Throws DomainError unless 0 < hurst < 0.5, nFactors >= 1 and beta > 1.
LiftedWeights lifted_weights(double hurst, int nFactors = 20, double beta = 2.5);

// Weights are always derived from (hurst, nFactors, beta); there is no way to
// construct an instance with inconsistent weights.
class LiftedHestonParams {
public:
    LiftedHestonParams(HestonParams heston, double hurst, int nFactors = 20, double beta = 2.5);

    const HestonParams& heston() const { return heston_; }
    double hurst() const { return hurst_; }
    int n_factors() const { return nFactors_; }
    double beta() const { return beta_; }
    const LiftedWeights& weights() const { return weights_; }

    // V0 + a VL sum_i (c_i/x_i)(1 - exp(-x_i t)): the variance curve when xi = 0.
    double deterministic_variance(double t) const;

private:
    HestonParams heston_;
    double hurst_;
    int nFactors_;
    double beta_;
    LiftedWeights weights_;
};

enum class ModelKind { heston, bates, lifted_heston };

using ModelParams = std::variant<HestonParams, BatesParams, LiftedHestonParams>;

ModelKind kind_of(const ModelParams& m);
const HestonParams& heston_part(const ModelParams& m);
std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

// Mean percentage jump E[k] = exp(muJ + sigmaJ^2/2) - 1.
double bates_mean_jump(double muJ, double sigmaJ);

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    double draw(Rng& rng) const;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

enum class ExoticSampling { controlled, parity };

// One row of the barrier-parity strike/barrier table.
struct ParityBucket {
    double maturity;
    Range strikePct;        // K as a percentage of spot
    Range barrierMultiple;  // beta in B = beta * max(S, K)
};

struct SamplerConfig {
    double spot = 100.0;
    double yield = 0.0;

    Range rate{0.01, 0.05};
    Range v0{0.01, 0.25};
    Range a{0.1, 3.0};
    Range vL{0.01, 0.25};
    Range xi{0.1, 0.8};
    Range rho{-0.9, 0.0};
    Range lambda{1.0, 5.0};
    Range muJ{-0.05, 0.05};
    Range sigmaJ{0.0, 0.05};
    Range hurst{0.05, 0.25};
    int liftedFactors = 20;
    double liftedBeta = 2.5;

    // S&P-style initial and long-run vol samplers.
    bool snpStyle = false;
    double snpLogMean = -2.5;
    double snpLogStd = 1.0;
    double snpVolFloor = 0.05;
    double snpVolCap = 1.0;
    double longRunIntercept = 0.12;
    double longRunSlope = 0.46;
    double longRunHalfWidth = 0.04;

    ExoticSampling exoticSampling = ExoticSampling::controlled;
    Range maturity{0.05, 2.0};
    Range strike{80.0, 120.0};
    Range barrierMultiple{1.05, 1.30};
    std::vector<ParityBucket> parityBuckets{
        {0.25, {92.5, 107.5}, {1.10, 1.15}},
        {0.5, {90.0, 110.0}, {1.10, 1.30}},
        {1.0, {85.0, 115.0}, {1.20, 1.35}},
        {2.0, {80.0, 120.0}, {1.30, 1.50}},
    };

    std::uint64_t seed = 1;

    // Throws ConfigError on an inverted or non-finite range.
    void validate() const;
};

void to_json(nlohmann::json& j, const SamplerConfig& c);
void from_json(const nlohmann::json& j, SamplerConfig& c);

struct ModelDraw {
    ModelParams params;
    MarketState market;
};

ModelDraw sample_model(const SamplerConfig& cfg, ModelKind kind, Rng& rng);
ExoticSpec sample_exotic(const SamplerConfig& cfg, ExoticKind kind, Rng& rng);

void to_json(nlohmann::json& j, const HestonParams& p);
void from_json(const nlohmann::json& j, HestonParams& p);
void to_json(nlohmann::json& j, const ModelParams& p);

}  // namespace exoval
