#include "exoval/pricing_mc.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "exoval/error.hpp"
#include "exoval/parallel.hpp"

namespace exoval {

void McConfig::validate() const {
    if (numPaths < 2) throw ConfigError("numPaths must be at least 2");
    if (stepsPerYear < 12) throw ConfigError("stepsPerYear must be at least 12");
    if (minSteps < 1) throw ConfigError("minSteps must be positive");
}

void to_json(nlohmann::json& j, const McConfig& c) {
    j = {{"numPaths", c.numPaths}, {"stepsPerYear", c.stepsPerYear}, {"minSteps", c.minSteps},
         {"seed", c.seed},         {"antithetic", c.antithetic},     {"commonPaths", c.commonPaths}};
}

void from_json(const nlohmann::json& j, McConfig& c) {
    if (j.contains("numPaths")) c.numPaths = j.at("numPaths").get<std::size_t>();
    if (j.contains("stepsPerYear")) c.stepsPerYear = j.at("stepsPerYear").get<int>();
    if (j.contains("minSteps")) c.minSteps = j.at("minSteps").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("antithetic")) c.antithetic = j.at("antithetic").get<bool>();
    if (j.contains("commonPaths")) c.commonPaths = j.at("commonPaths").get<bool>();
}

// TimeGrid --------------------------------------------------------------------

TimeGrid TimeGrid::for_maturities(std::span<const double> maturities, int stepsPerYear, int minSteps) {
    if (maturities.empty()) throw ConfigError("time grid needs at least one maturity");
    std::vector<double> sorted(maturities.begin(), maturities.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (!(sorted.front() > 0.0)) throw ConfigError("maturities must be positive");

    const double density = std::max<double>(stepsPerYear, minSteps / sorted.back());
    TimeGrid g;
    g.times_.push_back(0.0);
    double prev = 0.0;
    for (double T : sorted) {
        const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((T - prev) * density - 1e-9)));
        for (std::size_t k = 1; k < n; ++k) g.times_.push_back(prev + (T - prev) * k / n);
        g.times_.push_back(T);
        g.maturityIndex_.emplace_back(T, g.times_.size() - 1);
        prev = T;
    }
    return g;
}

std::size_t TimeGrid::index_of(double maturity) const {
    for (const auto& [T, idx] : maturityIndex_)
        if (T == maturity) return idx;
    throw ConfigError("maturity is not a grid point");
}

std::span<const double> PathSet::path(std::size_t i) const {
    const std::size_t w = grid.steps() + 1;
    return {spot.data() + i * w, w};
}

std::span<const double> PathSet::variance_path(std::size_t i) const {
    const std::size_t w = grid.steps() + 1;
    return {variance.data() + i * w, w};
}

// Simulation ------------------------------------------------------------------

namespace {

constexpr std::uint64_t kDiffusionStream = 0;
constexpr std::uint64_t kJumpStream = 1;

class PathSimulator {
public:
    PathSimulator(const ModelParams& model, const MarketState& market, const TimeGrid& grid)
        : grid_(grid), market_(market), kind_(kind_of(model)), heston_(heston_part(model)) {
        const auto& t = grid.times();
        const std::size_t n = grid.steps();
        dt_.resize(n);
        sqrtDt_.resize(n);
        shocks_.resize(2 * n);
        for (std::size_t k = 0; k < n; ++k) {
            dt_[k] = t[k + 1] - t[k];
            sqrtDt_[k] = std::sqrt(dt_[k]);
        }
        rhoPerp_ = std::sqrt(std::max(0.0, 1.0 - heston_.rho * heston_.rho));
        drift_ = market.rate - market.yield;
        if (const auto* b = std::get_if<BatesParams>(&model)) {
            jumps_ = *b;
            drift_ -= b->lambda * bates_mean_jump(b->muJ, b->sigmaJ);
            jumpLog_.assign(n, 0.0);
        }
        if (const auto* l = std::get_if<LiftedHestonParams>(&model)) {
            c_ = l->weights().c;
            const std::size_t m = c_.size();
            decay_.resize(n * m);
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t i = 0; i < m; ++i) decay_[k * m + i] = std::exp(-l->weights().x[i] * dt_[k]);
            baseline_.resize(n + 1);
            for (std::size_t k = 0; k <= n; ++k) baseline_[k] = l->deterministic_variance(t[k]);
            factors_.assign(m, 0.0);
        }
    }

    // Draws the Gaussian shocks (and jumps) of sample `pairIndex`; build() then
    // turns them into a path. An antithetic pair is two builds of one draw.
    void draw(std::uint64_t seed, std::uint64_t pairIndex) {
        Rng rng = substream(seed, pairIndex, kDiffusionStream);
        for (double& z : shocks_) z = gauss_(rng);
        if (kind_ == ModelKind::bates) draw_jumps(seed, pairIndex);
    }

    // sign = -1 mirrors every Gaussian shock of the diffusion; jump times and
    // sizes are shared within an antithetic pair.
    void build(double sign, std::span<double> spot, std::span<double> variance) {
        const std::size_t n = grid_.steps();
        double logS = std::log(market_.spot);
        double v = heston_.v0;
        spot[0] = market_.spot;
        if (!variance.empty()) variance[0] = v;
        if (kind_ == ModelKind::lifted_heston) std::fill(factors_.begin(), factors_.end(), 0.0);

        const double rho = heston_.rho;
        for (std::size_t k = 0; k < n; ++k) {
            const double z1 = sign * shocks_[2 * k];
            const double z2 = sign * shocks_[2 * k + 1];
            const double zs = rho * z1 + rhoPerp_ * z2;
            const double vp = std::max(v, 0.0);
            const double sv = std::sqrt(vp);
            const double dt = dt_[k];

            logS += (drift_ - 0.5 * vp) * dt + sv * sqrtDt_[k] * zs;
            if (kind_ == ModelKind::bates) logS += jumpLog_[k];

            if (kind_ == ModelKind::lifted_heston) {
                const std::size_t m = factors_.size();
                const double shock = heston_.xi * sv * sqrtDt_[k] * z1;
                const double* dec = decay_.data() + k * m;
                double sum = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    factors_[i] = factors_[i] * dec[i] + shock;
                    sum += c_[i] * factors_[i];
                }
                v = baseline_[k + 1] + sum;
            } else {
                v += heston_.a * (heston_.vL - vp) * dt + heston_.xi * sv * sqrtDt_[k] * z1;
            }
            spot[k + 1] = std::exp(logS);
            if (!variance.empty()) variance[k + 1] = v;
        }
    }

private:
    void draw_jumps(std::uint64_t seed, std::uint64_t pairIndex) {
        std::fill(jumpLog_.begin(), jumpLog_.end(), 0.0);
        if (jumps_.lambda <= 0.0) return;
        Rng rng = substream(seed, pairIndex, kJumpStream);
        std::exponential_distribution<double> wait(jumps_.lambda);
        const auto& t = grid_.times();
        double tau = wait(rng);
        std::size_t k = 0;
        while (tau < grid_.horizon()) {
            while (t[k + 1] < tau) ++k;
            jumpLog_[k] += jumps_.muJ + jumps_.sigmaJ * gauss_(rng);
            tau += wait(rng);
        }
    }

    const TimeGrid& grid_;
    MarketState market_;
    ModelKind kind_;
    HestonParams heston_;
    double rhoPerp_ = 1.0;
    double drift_ = 0.0;
    std::vector<double> dt_, sqrtDt_, shocks_;
    BatesParams jumps_{};
    std::vector<double> jumpLog_;
    std::vector<double> c_, decay_, baseline_, factors_;
    boost::random::normal_distribution<double> gauss_;
};

std::size_t sample_count(const McConfig& cfg) { return cfg.antithetic ? cfg.numPaths / 2 : cfg.numPaths; }

constexpr std::size_t kChunk = 256;

// Running moments of one quantity, mergeable in a fixed order.
struct Moments {
    double n = 0.0, mean = 0.0, m2 = 0.0;

    void add(double x) {
        n += 1.0;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    void merge(const Moments& o) {
        if (o.n == 0.0) return;
        const double total = n + o.n;
        const double d = o.mean - mean;
        mean += d * o.n / total;
        m2 += o.m2 + d * d * n * o.n / total;
        n = total;
    }
    PriceEstimate estimate(double df) const {
        const double var = n > 1.0 ? m2 / (n - 1.0) : 0.0;
        return {df * mean, df * std::sqrt(var / n)};
    }
};

// Simulates every sample (a path, or an antithetic pair) and feeds the
// per-sample payoff vector to the moments. `evaluate` maps one path to
// `width` payoffs. Chunks are reduced in index order.
template <class Evaluate>
std::vector<Moments> run_samples(const ModelParams& model, const MarketState& market, const TimeGrid& grid,
                                 const McConfig& cfg, std::uint64_t seed, std::size_t width, Evaluate evaluate) {
    const std::size_t samples = sample_count(cfg);
    const std::size_t chunks = (samples + kChunk - 1) / kChunk;
    std::vector<std::vector<Moments>> partial(chunks, std::vector<Moments>(width));

    parallel_for(chunks, [&](std::size_t c) {
        PathSimulator sim(model, market, grid);
        std::vector<double> path(grid.steps() + 1);
        std::vector<double> up(width), down(width);
        const std::size_t end = std::min(samples, (c + 1) * kChunk);
        for (std::size_t s = c * kChunk; s < end; ++s) {
            sim.draw(seed, s);
            sim.build(1.0, path, {});
            evaluate(std::span<const double>(path), std::span<double>(up));
            if (cfg.antithetic) {
                sim.build(-1.0, path, {});
                evaluate(std::span<const double>(path), std::span<double>(down));
                for (std::size_t w = 0; w < width; ++w) up[w] = 0.5 * (up[w] + down[w]);
            }
            for (std::size_t w = 0; w < width; ++w) partial[c][w].add(up[w]);
        }
    });

    std::vector<Moments> total(width);
    for (const auto& chunk : partial)
        for (std::size_t w = 0; w < width; ++w) total[w].merge(chunk[w]);
    return total;
}

void check_model(const ModelParams& model, const MarketState& market) {
    market.validate();
    std::visit([](const auto& p) {
        if constexpr (requires { p.validate(); }) p.validate();
        else p.heston().validate();
    }, model);
}

}  // namespace

PathSet simulate_paths(const ModelParams& model, const MarketState& market, double maturity, const McConfig& cfg) {
    cfg.validate();
    check_model(model, market);
    if (!(maturity > 0.0)) throw ConfigError("maturity must be positive");
    const double Ts[] = {maturity};
    PathSet set{TimeGrid::for_maturities(Ts, cfg.stepsPerYear, cfg.minSteps), cfg.numPaths, {}, {}};
    const std::size_t w = set.grid.steps() + 1;
    set.spot.resize(cfg.numPaths * w);
    set.variance.resize(cfg.numPaths * w);
    PathSimulator sim(model, market, set.grid);
    for (std::size_t i = 0; i < cfg.numPaths; ++i) {
        const bool mirrored = cfg.antithetic && (i % 2 == 1);
        if (!mirrored) sim.draw(cfg.seed, cfg.antithetic ? i / 2 : i);
        sim.build(mirrored ? -1.0 : 1.0, {set.spot.data() + i * w, w}, {set.variance.data() + i * w, w});
    }
    return set;
}

double payoff(std::span<const double> path, const ExoticSpec& spec) {
    const double K = spec.strike;
    const double ST = path.back();
    switch (spec.kind) {
        case ExoticKind::european_call:
            return std::max(ST - K, 0.0);
        case ExoticKind::knock_out_call:
        case ExoticKind::knock_in_call: {
            const bool hit = *std::max_element(path.begin(), path.end()) >= *spec.barrier;
            const bool alive = (spec.kind == ExoticKind::knock_out_call) ? !hit : hit;
            return alive ? std::max(ST - K, 0.0) : 0.0;
        }
        case ExoticKind::asian_call: {
            double sum = 0.0;
            for (std::size_t i = 1; i < path.size(); ++i) sum += path[i];
            const double avg = path.size() > 1 ? sum / static_cast<double>(path.size() - 1) : ST;
            return std::max(avg - K, 0.0);
        }
        case ExoticKind::lookback_call:
            return std::max(*std::max_element(path.begin(), path.end()) - K, 0.0);
    }
    return 0.0;
}

std::vector<PriceEstimate> mc_price_many(const ModelParams& model, const MarketState& market,
                                         std::span<const ExoticSpec> specs, const McConfig& cfg) {
    cfg.validate();
    check_model(model, market);
    for (const auto& s : specs) s.validate(market.spot);
    if (specs.empty()) return {};

    if (!cfg.commonPaths && specs.size() > 1) {
        std::vector<PriceEstimate> out;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            McConfig one = cfg;
            one.seed = derive_seed(cfg.seed, stream_tag("spec"), i);
            out.push_back(mc_price_many(model, market, specs.subspan(i, 1), one).front());
        }
        return out;
    }

    std::vector<double> maturities;
    for (const auto& s : specs) maturities.push_back(s.maturity);
    const TimeGrid grid = TimeGrid::for_maturities(maturities, cfg.stepsPerYear, cfg.minSteps);
    std::vector<std::size_t> lastIndex;
    for (const auto& s : specs) lastIndex.push_back(grid.index_of(s.maturity));

    const auto moments = run_samples(model, market, grid, cfg, cfg.seed, specs.size(),
                                     [&](std::span<const double> path, std::span<double> out) {
                                         for (std::size_t i = 0; i < specs.size(); ++i)
                                             out[i] = payoff(path.first(lastIndex[i] + 1), specs[i]);
                                     });
    std::vector<PriceEstimate> out;
    for (std::size_t i = 0; i < specs.size(); ++i)
        out.push_back(moments[i].estimate(std::exp(-market.rate * specs[i].maturity)));
    return out;
}

PriceEstimate mc_price(const ModelParams& model, const MarketState& market, const ExoticSpec& spec,
                       const McConfig& cfg) {
    return mc_price_many(model, market, std::span<const ExoticSpec>(&spec, 1), cfg).front();
}

std::vector<VanillaEstimate> mc_vanilla_grid(const ModelParams& model, const MarketState& market,
                                             std::span<const double> maturities, std::span<const double> strikes,
                                             const McConfig& cfg) {
    cfg.validate();
    check_model(model, market);
    const TimeGrid grid = TimeGrid::for_maturities(maturities, cfg.stepsPerYear, cfg.minSteps);
    std::vector<std::size_t> index;
    for (double T : maturities) index.push_back(grid.index_of(T));
    const std::size_t nk = strikes.size();
    const std::size_t width = 2 * maturities.size() * nk;

    const auto moments = run_samples(model, market, grid, cfg, cfg.seed, width,
                                     [&](std::span<const double> path, std::span<double> out) {
                                         for (std::size_t m = 0; m < maturities.size(); ++m) {
                                             const double S = path[index[m]];
                                             for (std::size_t k = 0; k < nk; ++k) {
                                                 out[2 * (m * nk + k)] = std::max(S - strikes[k], 0.0);
                                                 out[2 * (m * nk + k) + 1] = std::max(strikes[k] - S, 0.0);
                                             }
                                         }
                                     });
    std::vector<VanillaEstimate> out;
    for (std::size_t m = 0; m < maturities.size(); ++m) {
        const double df = std::exp(-market.rate * maturities[m]);
        for (std::size_t k = 0; k < nk; ++k)
            out.push_back({moments[2 * (m * nk + k)].estimate(df), moments[2 * (m * nk + k) + 1].estimate(df)});
    }
    return out;
}

}  // namespace exoval
