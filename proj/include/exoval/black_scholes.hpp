#pragma once

namespace exoval {

enum class OptionType { call, put };

double norm_cdf(double x);
double norm_pdf(double x);

// Black-Scholes-Merton European value with continuous yield. sigma = 0
// returns the discounted intrinsic value of the forward.
double bs_price(OptionType type, double S, double K, double r, double q, double T, double sigma);
double bs_call(double S, double K, double r, double q, double T, double sigma);
double bs_put(double S, double K, double r, double q, double T, double sigma);
double bs_vega(double S, double K, double r, double q, double T, double sigma);

// Volatility reproducing `price` for the given option type, searched on
// (1e-6, 5). Throws ArbitrageError when the price is outside the open interval
// of static bounds and NumericError when the solver fails.
//
// Inverting the out-of-the-money side (put for K below the forward) keeps the
// full relative precision of the quote; a deep in-the-money call price is
// mostly intrinsic value and loses the information in rounding.
double implied_vol(double price, double S, double K, double r, double q, double T,
                   OptionType type = OptionType::call);

}  // namespace exoval
