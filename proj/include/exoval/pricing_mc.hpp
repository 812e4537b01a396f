#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "exoval/exotic.hpp"
#include "exoval/market_models.hpp"

namespace exoval {

struct McConfig {
    std::size_t numPaths = 10000;
    int stepsPerYear = 250;
    int minSteps = 50;
    std::uint64_t seed = 1;
    bool antithetic = true;
    bool commonPaths = true;

    void validate() const;
};

void to_json(nlohmann::json& j, const McConfig& c);
void from_json(const nlohmann::json& j, McConfig& c);

struct PriceEstimate {
    double price = 0.0;
    double stdError = 0.0;
};

// Simulation times 0 = t_0 < ... < t_n. Every requested maturity is a grid
// point; the interval up to each maturity is cut into equal steps of at most
// 1/stepsPerYear, with at least minSteps steps in total.
class TimeGrid {
public:
    static TimeGrid for_maturities(std::span<const double> maturities, int stepsPerYear, int minSteps);

    const std::vector<double>& times() const { return times_; }
    std::size_t steps() const { return times_.size() - 1; }
    double horizon() const { return times_.back(); }
    // Grid index of a maturity passed to for_maturities.
    std::size_t index_of(double maturity) const;

private:
    std::vector<double> times_;
    std::vector<std::pair<double, std::size_t>> maturityIndex_;
};

struct PathSet {
    TimeGrid grid;
    std::size_t numPaths = 0;
    std::vector<double> spot;      // numPaths rows of grid.steps() + 1 values
    std::vector<double> variance;  // same layout

    std::span<const double> path(std::size_t i) const;
    std::span<const double> variance_path(std::size_t i) const;
};

// Discretized asset and variance paths on the grid of a single maturity.
// With antithetic sampling paths 2j and 2j+1 use mirrored Gaussian shocks.
PathSet simulate_paths(const ModelParams& model, const MarketState& market, double maturity, const McConfig& cfg);

// Undiscounted payoff of one monitored path. path[0] is the spot at time 0 and
// path.back() the spot at maturity; averages use path[1..], extremes path[0..].
double payoff(std::span<const double> path, const ExoticSpec& spec);

PriceEstimate mc_price(const ModelParams& model, const MarketState& market, const ExoticSpec& spec,
                       const McConfig& cfg);

// Prices several contracts; with cfg.commonPaths they share one path set.
std::vector<PriceEstimate> mc_price_many(const ModelParams& model, const MarketState& market,
                                         std::span<const ExoticSpec> specs, const McConfig& cfg);

struct VanillaEstimate {
    PriceEstimate call;
    PriceEstimate put;
};

// European calls and puts for every (maturity, strike) pair on one path set,
// maturity-major. Puts come from put payoffs, not from parity, so deep
// out-of-the-money quotes keep their relative accuracy.
std::vector<VanillaEstimate> mc_vanilla_grid(const ModelParams& model, const MarketState& market,
                                             std::span<const double> maturities, std::span<const double> strikes,
                                             const McConfig& cfg);

}  // namespace exoval
