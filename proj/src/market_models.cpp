#include "exoval/market_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "exoval/error.hpp"

namespace exoval {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite");
}

}  // namespace

std::string_view to_string(ExoticKind kind) {
    switch (kind) {
        case ExoticKind::knock_out_call: return "knock_out_call";
        case ExoticKind::knock_in_call: return "knock_in_call";
        case ExoticKind::asian_call: return "asian_call";
        case ExoticKind::lookback_call: return "lookback_call";
        case ExoticKind::european_call: return "european_call";
    }
    return "unknown";
}

ExoticKind parse_exotic_kind(std::string_view name) {
    if (name == "knock_out_call" || name == "barrier" || name == "ko") return ExoticKind::knock_out_call;
    if (name == "knock_in_call" || name == "ki") return ExoticKind::knock_in_call;
    if (name == "asian_call" || name == "asian") return ExoticKind::asian_call;
    if (name == "lookback_call" || name == "lookback") return ExoticKind::lookback_call;
    if (name == "european_call" || name == "european" || name == "vanilla") return ExoticKind::european_call;
    throw ConfigError("unknown exotic kind: " + std::string(name));
}

void ExoticSpec::validate(double spot) const {
    if (!(strike > 0.0) || !std::isfinite(strike)) throw ConfigError("strike must be positive");
    if (!(maturity > 0.0) || !std::isfinite(maturity)) throw ConfigError("maturity must be positive");
    if (is_barrier(kind)) {
        if (!barrier) throw ConfigError("barrier option without a barrier level");
        if (!(*barrier > std::max(spot, strike)))
            throw ConfigError("barrier must exceed both spot and strike");
    } else if (barrier) {
        throw ConfigError("barrier level given for a non-barrier payoff");
    }
}

ExoticSpec ExoticSpec::with_kind(ExoticKind k) const {
    ExoticSpec out = *this;
    out.kind = k;
    if (!is_barrier(k)) out.barrier.reset();
    return out;
}

void MarketState::validate() const {
    if (!(spot > 0.0) || !std::isfinite(spot)) throw ConfigError("spot must be positive");
    require_finite(rate, "rate");
    require_finite(yield, "yield");
}

void HestonParams::validate() const {
    for (double v : {v0, a, vL, xi, rho}) require_finite(v, "Heston parameter");
    if (v0 < 0.0 || vL < 0.0 || a < 0.0 || xi < 0.0)
        throw ConfigError("Heston v0, a, vL and xi must be non-negative");
    if (rho < -1.0 || rho > 1.0) throw ConfigError("Heston rho must lie in [-1, 1]");
}

void BatesParams::validate() const {
    heston.validate();
    require_finite(lambda, "lambda");
    require_finite(muJ, "muJ");
    require_finite(sigmaJ, "sigmaJ");
    if (lambda < 0.0) throw ConfigError("jump intensity must be non-negative");
    if (sigmaJ < 0.0) throw ConfigError("jump size scale must be non-negative");
}

LiftedWeights lifted_weights(double hurst, int nFactors, double beta) {
    if (!(hurst > 0.0 && hurst < 0.5))
        throw DomainError("lifted weights need 0 < hurst < 0.5");
    if (nFactors < 1) throw DomainError("lifted weights need at least one factor");
    if (!(beta > 1.0)) throw DomainError("lifted weights need beta > 1");

    const double alpha = hurst + 0.5;
    const double n = nFactors;
    const double denom = std::pow(beta, 1.0 - alpha) - 1.0;
    const double cScale = denom * std::pow(beta, (alpha - 1.0) * (1.0 + n / 2.0)) /
                          (std::tgamma(alpha) * std::tgamma(2.0 - alpha));
    const double xScale = ((1.0 - alpha) / (2.0 - alpha)) * ((std::pow(beta, 2.0 - alpha) - 1.0) / denom);

    LiftedWeights w;
    w.c.resize(nFactors);
    w.x.resize(nFactors);
    for (int i = 1; i <= nFactors; ++i) {
        w.c[i - 1] = cScale * std::pow(beta, (1.0 - alpha) * i);
        w.x[i - 1] = xScale * std::pow(beta, i - 1.0 - n / 2.0);
    }
    return w;
}

LiftedHestonParams::LiftedHestonParams(HestonParams heston, double hurst, int nFactors, double beta)
    : heston_(heston), hurst_(hurst), nFactors_(nFactors), beta_(beta),
      weights_(lifted_weights(hurst, nFactors, beta)) {
    heston_.validate();
}

double LiftedHestonParams::deterministic_variance(double t) const {
    double sum = 0.0;
    for (int i = 0; i < nFactors_; ++i)
        sum += weights_.c[i] / weights_.x[i] * -std::expm1(-weights_.x[i] * t);
    return heston_.v0 + heston_.a * heston_.vL * sum;
}

ModelKind kind_of(const ModelParams& m) {
    return static_cast<ModelKind>(m.index());
}

const HestonParams& heston_part(const ModelParams& m) {
    return std::visit(
        [](const auto& p) -> const HestonParams& {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, HestonParams>) return p;
            else if constexpr (std::is_same_v<T, BatesParams>) return p.heston;
            else return p.heston();
        },
        m);
}

std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::heston: return "heston";
        case ModelKind::bates: return "bates";
        case ModelKind::lifted_heston: return "lifted_heston";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "heston") return ModelKind::heston;
    if (name == "bates") return ModelKind::bates;
    if (name == "lifted_heston" || name == "lifted" || name == "rough") return ModelKind::lifted_heston;
    throw ConfigError("unknown model kind: " + std::string(name));
}

double bates_mean_jump(double muJ, double sigmaJ) {
    return std::expm1(muJ + 0.5 * sigmaJ * sigmaJ);
}

double Range::draw(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return lo + (hi - lo) * u;
}

void SamplerConfig::validate() const {
    auto check = [](const Range& r, const char* name) {
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
            throw ConfigError(std::string("invalid range for ") + name);
    };
    check(rate, "rate");
    check(v0, "v0");
    check(a, "a");
    check(vL, "vL");
    check(xi, "xi");
    check(rho, "rho");
    check(lambda, "lambda");
    check(muJ, "muJ");
    check(sigmaJ, "sigmaJ");
    check(hurst, "hurst");
    check(maturity, "maturity");
    check(strike, "strike");
    check(barrierMultiple, "barrierMultiple");
    if (v0.lo < 0 || vL.lo < 0 || a.lo < 0 || xi.lo < 0 || lambda.lo < 0 || sigmaJ.lo < 0)
        throw ConfigError("variance, speed, vol-of-vol and jump ranges must be non-negative");
    if (rho.lo < -1.0 || rho.hi > 1.0) throw ConfigError("rho range must lie in [-1, 1]");
    if (hurst.lo <= 0.0 || hurst.hi >= 0.5) throw ConfigError("hurst range must lie in (0, 0.5)");
    if (maturity.lo <= 0.0 || strike.lo <= 0.0) throw ConfigError("maturity and strike must be positive");
    if (barrierMultiple.lo <= 1.0) throw ConfigError("barrier multiple must exceed 1");
    if (!(spot > 0.0)) throw ConfigError("spot must be positive");
    if (!(snpLogStd >= 0.0) || !(snpVolCap > snpVolFloor) || !(longRunHalfWidth >= 0.0))
        throw ConfigError("invalid S&P-style sampler settings");
    if (liftedFactors < 1 || !(liftedBeta > 1.0)) throw ConfigError("invalid lifted Heston settings");
    if (parityBuckets.empty()) throw ConfigError("parity sampling needs at least one maturity bucket");
    for (const auto& b : parityBuckets) {
        check(b.strikePct, "parity strike");
        check(b.barrierMultiple, "parity barrier multiple");
        if (b.maturity <= 0.0 || b.strikePct.lo <= 0.0 || b.barrierMultiple.lo <= 1.0)
            throw ConfigError("invalid parity bucket");
    }
}

ModelDraw sample_model(const SamplerConfig& cfg, ModelKind kind, Rng& rng) {
    MarketState market{cfg.spot, cfg.rate.draw(rng), cfg.yield};

    HestonParams h;
    if (cfg.snpStyle) {
        std::normal_distribution<double> gauss(cfg.snpLogMean, cfg.snpLogStd);
        const double vol0 = std::min(cfg.snpVolFloor + std::exp(gauss(rng)), cfg.snpVolCap);
        h.v0 = vol0 * vol0;
        const double centre = cfg.longRunIntercept + cfg.longRunSlope * vol0;
        const double longVol =
            std::max(Range{centre - cfg.longRunHalfWidth, centre + cfg.longRunHalfWidth}.draw(rng), 0.0);
        h.vL = longVol * longVol;
    } else {
        h.v0 = cfg.v0.draw(rng);
        h.vL = cfg.vL.draw(rng);
    }
    h.a = cfg.a.draw(rng);
    h.xi = cfg.xi.draw(rng);
    h.rho = cfg.rho.draw(rng);

    switch (kind) {
        case ModelKind::heston:
            return {h, market};
        case ModelKind::bates: {
            BatesParams b{h, 0.0, 0.0, 0.0};
            b.lambda = cfg.lambda.draw(rng);
            b.muJ = cfg.muJ.draw(rng);
            b.sigmaJ = cfg.sigmaJ.draw(rng);
            return {b, market};
        }
        case ModelKind::lifted_heston: {
            const double hurst = cfg.hurst.draw(rng);
            return {LiftedHestonParams(h, hurst, cfg.liftedFactors, cfg.liftedBeta), market};
        }
    }
    throw ConfigError("unknown model kind");
}

ExoticSpec sample_exotic(const SamplerConfig& cfg, ExoticKind kind, Rng& rng) {
    ExoticSpec spec;
    spec.kind = kind;
    double multiple = 0.0;
    if (cfg.exoticSampling == ExoticSampling::controlled) {
        spec.maturity = cfg.maturity.draw(rng);
        spec.strike = cfg.strike.draw(rng);
        multiple = cfg.barrierMultiple.draw(rng);
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, cfg.parityBuckets.size() - 1);
        const ParityBucket& bucket = cfg.parityBuckets[pick(rng)];
        spec.maturity = bucket.maturity;
        spec.strike = bucket.strikePct.draw(rng) / 100.0 * cfg.spot;
        multiple = bucket.barrierMultiple.draw(rng);
    }
    // The multiple is always drawn so every kind consumes the same stream.
    if (is_barrier(kind)) spec.barrier = multiple * std::max(cfg.spot, spec.strike);
    return spec;
}

// JSON ----------------------------------------------------------------------

namespace {

void put(nlohmann::json& j, const char* key, const Range& r) { j[key] = {r.lo, r.hi}; }

void get(const nlohmann::json& j, const char* key, Range& r) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw ConfigError(std::string("range ") + key + " must be [lo, hi]");
    r.lo = v[0].get<double>();
    r.hi = v[1].get<double>();
}

template <class T>
void get(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(nlohmann::json& j, const SamplerConfig& c) {
    j = nlohmann::json::object();
    j["S0"] = c.spot;
    j["delta"] = c.yield;
    put(j, "r", c.rate);
    put(j, "V0", c.v0);
    put(j, "a", c.a);
    put(j, "VL", c.vL);
    put(j, "xi", c.xi);
    put(j, "rho", c.rho);
    put(j, "lambda", c.lambda);
    put(j, "mu", c.muJ);
    put(j, "sigma", c.sigmaJ);
    put(j, "H", c.hurst);
    j["n"] = c.liftedFactors;
    j["beta"] = c.liftedBeta;
    j["snpStyle"] = c.snpStyle;
    j["snpLogMean"] = c.snpLogMean;
    j["snpLogStd"] = c.snpLogStd;
    j["snpVolFloor"] = c.snpVolFloor;
    j["snpVolCap"] = c.snpVolCap;
    j["W_intercept"] = c.longRunIntercept;
    j["W_slope"] = c.longRunSlope;
    j["W_halfWidth"] = c.longRunHalfWidth;
    j["exoticSampling"] = c.exoticSampling == ExoticSampling::controlled ? "controlled" : "parity";
    put(j, "T", c.maturity);
    put(j, "K", c.strike);
    put(j, "C", c.barrierMultiple);
    auto buckets = nlohmann::json::array();
    for (const auto& b : c.parityBuckets) {
        nlohmann::json e;
        e["T"] = b.maturity;
        put(e, "strikePct", b.strikePct);
        put(e, "beta", b.barrierMultiple);
        buckets.push_back(e);
    }
    j["parityBuckets"] = buckets;
    j["seed"] = c.seed;
}

void from_json(const nlohmann::json& j, SamplerConfig& c) {
    if (!j.is_object()) throw ConfigError("sampler config must be a JSON object");
    get(j, "S0", c.spot);
    get(j, "delta", c.yield);
    get(j, "r", c.rate);
    get(j, "V0", c.v0);
    get(j, "a", c.a);
    get(j, "VL", c.vL);
    get(j, "xi", c.xi);
    get(j, "rho", c.rho);
    get(j, "lambda", c.lambda);
    get(j, "mu", c.muJ);
    get(j, "sigma", c.sigmaJ);
    get(j, "H", c.hurst);
    get(j, "n", c.liftedFactors);
    get(j, "beta", c.liftedBeta);
    get(j, "snpStyle", c.snpStyle);
    get(j, "snpLogMean", c.snpLogMean);
    get(j, "snpLogStd", c.snpLogStd);
    get(j, "snpVolFloor", c.snpVolFloor);
    get(j, "snpVolCap", c.snpVolCap);
    get(j, "W_intercept", c.longRunIntercept);
    get(j, "W_slope", c.longRunSlope);
    get(j, "W_halfWidth", c.longRunHalfWidth);
    if (j.contains("exoticSampling")) {
        const auto mode = j.at("exoticSampling").get<std::string>();
        if (mode == "controlled") c.exoticSampling = ExoticSampling::controlled;
        else if (mode == "parity") c.exoticSampling = ExoticSampling::parity;
        else throw ConfigError("exoticSampling must be 'controlled' or 'parity'");
    }
    get(j, "T", c.maturity);
    get(j, "K", c.strike);
    get(j, "C", c.barrierMultiple);
    if (j.contains("parityBuckets")) {
        c.parityBuckets.clear();
        for (const auto& e : j.at("parityBuckets")) {
            ParityBucket b{e.at("T").get<double>(), {}, {}};
            get(e, "strikePct", b.strikePct);
            get(e, "beta", b.barrierMultiple);
            c.parityBuckets.push_back(b);
        }
    }
    get(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const HestonParams& p) {
    j = {{"V0", p.v0}, {"a", p.a}, {"VL", p.vL}, {"xi", p.xi}, {"rho", p.rho}};
}

void from_json(const nlohmann::json& j, HestonParams& p) {
    p.v0 = j.at("V0").get<double>();
    p.a = j.at("a").get<double>();
    p.vL = j.at("VL").get<double>();
    p.xi = j.at("xi").get<double>();
    p.rho = j.at("rho").get<double>();
}

void to_json(nlohmann::json& j, const ModelParams& p) {
    j = heston_part(p);
    j["model"] = to_string(kind_of(p));
    if (const auto* b = std::get_if<BatesParams>(&p)) {
        j["lambda"] = b->lambda;
        j["mu"] = b->muJ;
        j["sigma"] = b->sigmaJ;
    } else if (const auto* l = std::get_if<LiftedHestonParams>(&p)) {
        j["H"] = l->hurst();
        j["n"] = l->n_factors();
        j["beta"] = l->beta();
    }
}

}  // namespace exoval
