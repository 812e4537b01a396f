#pragma once

#include <complex>
#include <span>
#include <vector>

#include "exoval/market_models.hpp"

namespace exoval {

// Characteristic function of ln(S_T / F_T) for Heston or Bates parameters.
// Throws ConfigError for lifted Heston, which has no closed form here.
std::complex<double> log_return_cf(const ModelParams& model, double T, std::complex<double> z);

struct CallPut {
    double call;
    double put;
};

// European calls and puts for all strikes at one maturity via the Lewis
// single-integral representation, written as a correction to a Black-Scholes
// price with matched total variance. The characteristic function is evaluated
// once per node and shared by all strikes. Throws NumericError if the
// integrand does not decay.
std::vector<CallPut> cf_vanilla_prices(const ModelParams& model, const MarketState& market, double T,
                                       std::span<const double> strikes);

double cf_european_price(const ModelParams& model, const MarketState& market, double K, double T);

}  // namespace exoval
