#include "exoval/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "exoval/error.hpp"
#include "exoval/parallel.hpp"

namespace exoval {

void CalibrationBudget::validate() const {
    if (starts < 1) throw ConfigError("calibration needs at least one start");
    if (evaluationsPerStart < 10) throw ConfigError("calibration needs at least 10 evaluations per start");
    if (!(failureThreshold > 0.0)) throw ConfigError("failure threshold must be positive");
    if (stallWindow < 1) throw ConfigError("stall window must be positive");
    for (const Range& r : {box.v0, box.a, box.vL, box.xi, box.rho})
        if (!(r.lo < r.hi)) throw ConfigError("calibration box ranges must have lo < hi");
}

void to_json(nlohmann::json& j, const CalibrationBudget& b) {
    j = {{"starts", b.starts},
         {"evaluationsPerStart", b.evaluationsPerStart},
         {"failureThreshold", b.failureThreshold},
         {"stallTolerance", b.stallTolerance},
         {"stallWindow", b.stallWindow},
         {"polishRestarts", b.polishRestarts},
         {"seed", b.seed}};
}

void from_json(const nlohmann::json& j, CalibrationBudget& b) {
    if (j.contains("starts")) b.starts = j.at("starts").get<int>();
    if (j.contains("evaluationsPerStart")) b.evaluationsPerStart = j.at("evaluationsPerStart").get<int>();
    if (j.contains("failureThreshold")) b.failureThreshold = j.at("failureThreshold").get<double>();
    if (j.contains("stallTolerance")) b.stallTolerance = j.at("stallTolerance").get<double>();
    if (j.contains("stallWindow")) b.stallWindow = j.at("stallWindow").get<int>();
    if (j.contains("polishRestarts")) b.polishRestarts = j.at("polishRestarts").get<int>();
    if (j.contains("seed")) b.seed = j.at("seed").get<std::uint64_t>();
}

void to_json(nlohmann::json& j, const CalibrationResult& r) {
    j = {{"params", r.params},
         {"X", r.error},
         {"converged", r.converged},
         {"evaluations", r.evaluations},
         {"bestStart", r.bestStart}};
}

CalibrationError calibration_error(const HestonParams& candidate, const SurfaceGrid& target,
                                   const MarketState& market) {
    const auto nodes = try_model_surface(candidate, market, target.mask);
    CalibrationError out;
    double sum = 0.0;
    const auto active = target.mask.active_nodes();
    for (std::size_t n : active) {
        if (nodes[n]) {
            sum += std::abs(*nodes[n] - target.vols[n]);
        } else {
            sum += kFailedNodePenalty;
            ++out.failedNodes;
        }
    }
    out.value = sum / static_cast<double>(active.size());
    return out;
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double to_box(double z, const Range& r) { return r.lo + (r.hi - r.lo) * logistic(z); }

double from_box(double v, const Range& r) {
    const double u = std::clamp((v - r.lo) / (r.hi - r.lo), 1e-9, 1.0 - 1e-9);
    return std::log(u / (1.0 - u));
}

}  // namespace

std::vector<double> to_unbounded(const HestonParams& p, const CalibrationBox& box) {
    return {from_box(p.v0, box.v0), from_box(p.a, box.a), from_box(p.vL, box.vL), from_box(p.xi, box.xi),
            from_box(p.rho, box.rho)};
}

HestonParams from_unbounded(const std::vector<double>& z, const CalibrationBox& box) {
    return {to_box(z[0], box.v0), to_box(z[1], box.a), to_box(z[2], box.vL), to_box(z[3], box.xi),
            to_box(z[4], box.rho)};
}

std::vector<HestonParams> latin_hypercube_starts(const CalibrationBox& box, int starts, std::uint64_t seed) {
    Rng rng = substream(seed, stream_tag("latin-hypercube"));
    const Range* dims[] = {&box.v0, &box.a, &box.vL, &box.xi, &box.rho};
    std::vector<std::vector<double>> coords(5, std::vector<double>(starts));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int d = 0; d < 5; ++d) {
        std::vector<int> strata(starts);
        std::iota(strata.begin(), strata.end(), 0);
        std::shuffle(strata.begin(), strata.end(), rng);
        for (int s = 0; s < starts; ++s) {
            const double u = (strata[s] + unit(rng)) / starts;
            coords[d][s] = dims[d]->lo + (dims[d]->hi - dims[d]->lo) * u;
        }
    }
    std::vector<HestonParams> out(starts);
    for (int s = 0; s < starts; ++s) out[s] = {coords[0][s], coords[1][s], coords[2][s], coords[3][s], coords[4][s]};
    return out;
}

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
                             double initialStep, int maxEvaluations) {
    const std::size_t n = start.size();
    std::vector<std::vector<double>> simplex(n + 1, start);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += initialStep;
    std::vector<double> values(n + 1);
    NelderMeadResult out;
    auto eval = [&](const std::vector<double>& x) {
        ++out.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
    };
    for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::vector<std::vector<double>> s2(n + 1);
        std::vector<double> v2(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            s2[i] = simplex[order[i]];
            v2[i] = values[order[i]];
        }
        simplex.swap(s2);
        values.swap(v2);
    };

    while (out.evaluations + 2 <= maxEvaluations) {
        sort_simplex();
        out.history.push_back(values[0]);
        if (values[n] - values[0] <= 1e-14 * (std::abs(values[0]) + 1e-14)) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / n;
        auto along = [&](double t) {
            std::vector<double> x(n);
            for (std::size_t d = 0; d < n; ++d) x[d] = centroid[d] + t * (simplex[n][d] - centroid[d]);
            return x;
        };

        const auto reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < values[0]) {
            const auto expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if (fr < values[n - 1]) {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            const bool outside = fr < values[n];
            const auto contracted = along(outside ? -0.5 : 0.5);
            const double fc = eval(contracted);
            if (fc < std::min(fr, values[n])) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                if (out.evaluations + static_cast<int>(n) > maxEvaluations) break;
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t d = 0; d < n; ++d) simplex[i][d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
                    values[i] = eval(simplex[i]);
                }
            }
        }
    }
    sort_simplex();
    out.history.push_back(values[0]);
    out.best = simplex[0];
    out.value = values[0];
    return out;
}

CalibrationResult calibrate_from(const SurfaceGrid& target, const MarketState& market, const CalibrationBudget& budget,
                                 const std::vector<HestonParams>& starts) {
    budget.validate();
    market.validate();
    target.validate();
    if (starts.empty()) throw ConfigError("calibration needs at least one start");

    std::vector<NelderMeadResult> runs(starts.size());
    parallel_for(starts.size(), [&](std::size_t s) {
        auto objective = [&](const std::vector<double>& z) {
            return calibration_error(from_unbounded(z, budget.box), target, market).value;
        };
        runs[s] = nelder_mead(objective, to_unbounded(starts[s], budget.box), 0.5, budget.evaluationsPerStart);
    });

    CalibrationResult result;
    std::size_t best = 0;
    for (std::size_t s = 0; s < runs.size(); ++s) {
        result.evaluations += runs[s].evaluations;
        if (runs[s].value < runs[best].value) best = s;
    }
    result.bestStart = static_cast<int>(best);

    // Restart the winning simplex with shrinking steps; a restart that cannot
    // improve by the stall tolerance marks convergence.
    auto objective = [&](const std::vector<double>& z) {
        return calibration_error(from_unbounded(z, budget.box), target, market).value;
    };
    std::vector<double> z = runs[best].best;
    double value = runs[best].value;
    std::vector<double> history = runs[best].history;
    bool stalled = false;
    for (int r = 0; r < budget.polishRestarts && !stalled; ++r) {
        const double step = 0.2 / (1 << r);
        auto polish = nelder_mead(objective, z, step, budget.evaluationsPerStart);
        result.evaluations += polish.evaluations;
        if (polish.value < value) {
            stalled = value - polish.value < budget.stallTolerance;
            z = polish.best;
            value = polish.value;
        } else {
            stalled = true;
        }
        history.insert(history.end(), polish.history.begin(), polish.history.end());
    }
    if (!stalled) {
        const std::size_t window = static_cast<std::size_t>(budget.stallWindow);
        stalled = history.size() > window && history[history.size() - 1 - window] - history.back() < budget.stallTolerance;
    }
    result.params = from_unbounded(z, budget.box);
    result.error = value;
    result.converged = stalled && result.error < budget.failureThreshold;
    return result;
}

CalibrationResult calibrate(const SurfaceGrid& target, const MarketState& market, const CalibrationBudget& budget) {
    budget.validate();
    return calibrate_from(target, market, budget, latin_hypercube_starts(budget.box, budget.starts, budget.seed));
}

}  // namespace exoval
