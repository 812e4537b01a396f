#include "exoval/heston_cf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>

#include "exoval/black_scholes.hpp"
#include "exoval/error.hpp"

namespace exoval {

namespace {

using cplx = std::complex<double>;

// exp(C + D v0) of the Heston log-return transform in the rotation-free
// ("little trap") form. q = iz + z^2. The ratios are arranged so that nothing
// is divided by xi^2, which keeps the xi -> 0 limit exact.
cplx heston_exponent(const HestonParams& p, double T, cplx z) {
    const cplx iz(-z.imag(), z.real());
    const cplx q = iz + z * z;
    const cplx b = p.a - p.rho * p.xi * iz;
    const cplx d = std::sqrt(b * b + p.xi * p.xi * q);
    const cplx bpd = b + d;
    if (std::abs(bpd) < 1e-300) return -0.5 * q * T * p.v0;  // a = xi = 0: constant variance

    const cplx e = std::exp(-d * T);
    const cplx g = -p.xi * p.xi * q / (bpd * bpd);
    const cplx dT = d * T;
    const cplx oneMinusE = std::abs(dT) < 1e-5 ? dT * (1.0 - dT / 2.0 + dT * dT / 6.0) : cplx(1.0) - e;
    const cplx D = -q / bpd * oneMinusE / (cplx(1.0) - g * e);

    // (2/xi^2) ln((1 - g e)/(1 - g)) = 2 r ln(1 + w)/w with w = xi^2 r.
    const cplx r = -q / (bpd * bpd) * oneMinusE / (cplx(1.0) - g);
    const cplx w = p.xi * p.xi * r;
    cplx logRatio;
    if (std::abs(w) < 1e-4) {
        logRatio = cplx(1.0) - w / 2.0 + w * w / 3.0 - w * w * w / 4.0;
    } else {
        logRatio = (std::log(cplx(1.0) - g * e) - std::log(cplx(1.0) - g)) / w;
    }
    const cplx C = p.a * p.vL * (-q * T / bpd - 2.0 * r * logRatio);
    return C + D * p.v0;
}

cplx jump_exponent(const BatesParams& b, double T, cplx z) {
    if (b.lambda == 0.0) return 0.0;
    const cplx iz(-z.imag(), z.real());
    const double kbar = bates_mean_jump(b.muJ, b.sigmaJ);
    return b.lambda * T * (std::exp(iz * b.muJ - 0.5 * b.sigmaJ * b.sigmaJ * z * z) - 1.0) - iz * b.lambda * kbar * T;
}

cplx log_cf_exponent(const ModelParams& model, double T, cplx z) {
    if (const auto* h = std::get_if<HestonParams>(&model)) return heston_exponent(*h, T, z);
    if (const auto* b = std::get_if<BatesParams>(&model)) return heston_exponent(b->heston, T, z) + jump_exponent(*b, T, z);
    throw ConfigError("characteristic-function pricing supports Heston and Bates only");
}

// Expected total log-return variance over [0, T]; sets the matched
// Black-Scholes control.
double total_variance(const ModelParams& model, double T) {
    const HestonParams& h = heston_part(model);
    double w = h.a > 1e-12 ? h.vL * T + (h.v0 - h.vL) * (-std::expm1(-h.a * T)) / h.a : h.v0 * T;
    if (const auto* b = std::get_if<BatesParams>(&model)) w += b->lambda * T * (b->muJ * b->muJ + b->sigmaJ * b->sigmaJ);
    return std::max(w, 1e-10 * T);
}

constexpr int kGaussPoints = 16;
constexpr double kEnvelopeTol = 1e-17;
constexpr int kMaxPanels = 20000;

}  // namespace

std::complex<double> log_return_cf(const ModelParams& model, double T, std::complex<double> z) {
    return std::exp(log_cf_exponent(model, T, z));
}

std::vector<CallPut> cf_vanilla_prices(const ModelParams& model, const MarketState& market, double T,
                                       std::span<const double> strikes) {
    if (kind_of(model) == ModelKind::lifted_heston)
        throw ConfigError("characteristic-function pricing supports Heston and Bates only");
    market.validate();
    if (!(T > 0.0)) throw ConfigError("maturity must be positive");

    const double S = market.spot, r = market.rate, q = market.yield;
    const double w = total_variance(model, T);
    const double sigmaCv = std::sqrt(w / T);

    const std::size_t nk = strikes.size();
    std::vector<double> logMoney(nk), integral(nk, 0.0);
    double maxAbsK = 0.0;
    for (std::size_t j = 0; j < nk; ++j) {
        if (!(strikes[j] > 0.0)) throw ConfigError("strikes must be positive");
        logMoney[j] = std::log(S / strikes[j]) + (r - q) * T;
        maxAbsK = std::max(maxAbsK, std::abs(logMoney[j]));
    }

    const double h = std::min(1.5 / std::sqrt(w), 3.0 / std::max(maxAbsK, 1e-3));
    using GL = boost::math::quadrature::gauss<double, kGaussPoints>;
    const auto& nodes = GL::abscissa();
    const auto& weights = GL::weights();

    auto accumulate = [&](double u, double weight) {
        const cplx phi = std::exp(log_cf_exponent(model, T, cplx(u, -0.5)));
        const double denom = u * u + 0.25;
        const double bs = std::exp(-0.5 * w * denom);
        const cplx diff = (bs - phi) / denom;
        for (std::size_t j = 0; j < nk; ++j) {
            const double arg = u * logMoney[j];
            integral[j] += weight * (std::cos(arg) * diff.real() - std::sin(arg) * diff.imag());
        }
        return (std::abs(phi) + bs) / denom;
    };

    bool converged = false;
    for (int panel = 0; panel < kMaxPanels; ++panel) {
        const double lo = panel * h;
        const double mid = lo + 0.5 * h;
        double envelope = 0.0;
        for (std::size_t n = 0; n < nodes.size(); ++n) {
            const double off = 0.5 * h * nodes[n];
            const double wt = 0.5 * h * weights[n];
            if (nodes[n] == 0.0) {
                envelope = std::max(envelope, accumulate(mid, wt));
            } else {
                envelope = std::max(envelope, accumulate(mid - off, wt));
                envelope = std::max(envelope, accumulate(mid + off, wt));
            }
        }
        if (!std::isfinite(envelope)) throw NumericError("characteristic function is not finite");
        if (envelope < kEnvelopeTol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericError("Fourier integral did not converge");

    std::vector<CallPut> out(nk);
    for (std::size_t j = 0; j < nk; ++j) {
        const double K = strikes[j];
        const double correction = std::sqrt(S * K) * std::exp(-0.5 * (r + q) * T) * integral[j] / std::numbers::pi;
        out[j].call = bs_call(S, K, r, q, T, sigmaCv) + correction;
        out[j].put = bs_put(S, K, r, q, T, sigmaCv) + correction;
    }
    return out;
}

double cf_european_price(const ModelParams& model, const MarketState& market, double K, double T) {
    const double strikes[] = {K};
    return cf_vanilla_prices(model, market, T, strikes).front().call;
}

}  // namespace exoval
