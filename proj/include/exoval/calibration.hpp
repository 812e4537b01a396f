#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "exoval/market_models.hpp"
#include "exoval/surface.hpp"

namespace exoval {

struct CalibrationBox {
    Range v0{0.001, 0.5};
    Range a{0.01, 5.0};
    Range vL{0.001, 0.5};
    Range xi{0.01, 1.5};
    Range rho{-0.99, 0.5};
};

struct CalibrationBudget {
    int starts = 8;
    int evaluationsPerStart = 400;
    double failureThreshold = 0.05;
    double stallTolerance = 1e-6;  // required improvement over the stall window
    int stallWindow = 50;          // iterations
    int polishRestarts = 3;        // restarts of the best start
    std::uint64_t seed = 7;
    CalibrationBox box;

    void validate() const;
};

void to_json(nlohmann::json& j, const CalibrationBudget& b);
void from_json(const nlohmann::json& j, CalibrationBudget& b);

struct CalibrationResult {
    HestonParams params;
    double error = 0.0;  // mean absolute vol error over active nodes
    bool converged = false;
    int evaluations = 0;
    int bestStart = -1;
};

void to_json(nlohmann::json& j, const CalibrationResult& r);

// Vol error charged to a node whose candidate price cannot be inverted.
inline constexpr double kFailedNodePenalty = 1.0;

struct CalibrationError {
    double value = 0.0;
    int failedNodes = 0;
};

// Mean absolute difference between the candidate's Heston surface and the
// target over the target's active nodes.
CalibrationError calibration_error(const HestonParams& candidate, const SurfaceGrid& target,
                                   const MarketState& market);

// Unconstrained <-> box coordinates used by the optimizer.
std::vector<double> to_unbounded(const HestonParams& p, const CalibrationBox& box);
HestonParams from_unbounded(const std::vector<double>& z, const CalibrationBox& box);

// Starting points: a Latin hypercube over the box, one stratum per start.
std::vector<HestonParams> latin_hypercube_starts(const CalibrationBox& box, int starts, std::uint64_t seed);

// Multi-start Nelder-Mead with best-so-far bookkeeping. Reduction is by
// lowest error, ties to the lowest start index.
CalibrationResult calibrate(const SurfaceGrid& target, const MarketState& market, const CalibrationBudget& budget = {});
CalibrationResult calibrate_from(const SurfaceGrid& target, const MarketState& market, const CalibrationBudget& budget,
                                 const std::vector<HestonParams>& starts);

struct NelderMeadResult {
    std::vector<double> best;
    double value = 0.0;
    int evaluations = 0;
    std::vector<double> history;  // best value after each iteration
};

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                             double initialStep, int maxEvaluations);

}  // namespace exoval
