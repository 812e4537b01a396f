#include "exoval/black_scholes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "exoval/error.hpp"

namespace exoval {

namespace {

constexpr double kVolLo = 1e-6;
constexpr double kVolHi = 5.0;
constexpr int kMaxIter = 200;

}  // namespace

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double bs_price(OptionType type, double S, double K, double r, double q, double T, double sigma) {
    const double df = std::exp(-r * T);
    const double fwdS = S * std::exp(-q * T);
    const double fwdK = K * df;
    const double sd = sigma * std::sqrt(T);
    if (sd <= 0.0) {
        return type == OptionType::call ? std::max(fwdS - fwdK, 0.0) : std::max(fwdK - fwdS, 0.0);
    }
    const double d1 = (std::log(fwdS / fwdK) + 0.5 * sd * sd) / sd;
    const double d2 = d1 - sd;
    if (type == OptionType::call) return fwdS * norm_cdf(d1) - fwdK * norm_cdf(d2);
    return fwdK * norm_cdf(-d2) - fwdS * norm_cdf(-d1);
}

double bs_call(double S, double K, double r, double q, double T, double sigma) {
    return bs_price(OptionType::call, S, K, r, q, T, sigma);
}

double bs_put(double S, double K, double r, double q, double T, double sigma) {
    return bs_price(OptionType::put, S, K, r, q, T, sigma);
}

double bs_vega(double S, double K, double r, double q, double T, double sigma) {
    const double sd = sigma * std::sqrt(T);
    if (sd <= 0.0) return 0.0;
    const double fwdS = S * std::exp(-q * T);
    const double d1 = (std::log(fwdS / (K * std::exp(-r * T))) + 0.5 * sd * sd) / sd;
    return fwdS * norm_pdf(d1) * std::sqrt(T);
}

double implied_vol(double price, double S, double K, double r, double q, double T, OptionType type) {
    if (!(S > 0.0) || !(K > 0.0) || !(T > 0.0))
        throw DomainError("implied_vol needs positive spot, strike and maturity");
    if (!std::isfinite(price)) throw NumericError("implied_vol: non-finite price");

    const double fwdS = S * std::exp(-q * T);
    const double fwdK = K * std::exp(-r * T);
    const double lower = type == OptionType::call ? std::max(fwdS - fwdK, 0.0) : std::max(fwdK - fwdS, 0.0);
    const double upper = type == OptionType::call ? fwdS : fwdK;
    if (!(price > lower) || !(price < upper))
        throw ArbitrageError("option price outside the no-arbitrage bounds");

    // The time value carries all information about sigma; solving on its log
    // keeps tiny out-of-the-money prices well conditioned.
    const double target = std::log(price - lower);
    auto excess = [&](double sigma) {
        const double tv = bs_price(type, S, K, r, q, T, sigma) - lower;
        return tv > 0.0 ? std::log(tv) - target : -std::numeric_limits<double>::infinity();
    };

    double lo = kVolLo, hi = kVolHi;
    if (excess(hi) < 0.0 || excess(lo) > 0.0)
        throw NumericError("implied volatility outside the search domain (1e-6, 5)");

    double sigma = std::clamp(std::sqrt(2.0 * std::abs(std::log(fwdS / fwdK)) / T), 0.05, 1.0);
    for (int iter = 0; iter < kMaxIter; ++iter) {
        const double tv = bs_price(type, S, K, r, q, T, sigma) - lower;
        const double f = tv > 0.0 ? std::log(tv) - target : -std::numeric_limits<double>::infinity();
        // |f| bounds the relative price error, so the absolute error is below
        // 1e-13 * price.
        if (std::abs(f) < 1e-13) return sigma;
        if (f < 0.0) lo = sigma;
        else hi = sigma;
        if (hi - lo < 1e-15 * hi) return sigma;

        const double vega = bs_vega(S, K, r, q, T, sigma);
        double next = (tv > 0.0 && vega > 0.0) ? sigma - f * tv / vega : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        sigma = next;
    }
    throw NumericError("implied_vol did not converge");
}

}  // namespace exoval
