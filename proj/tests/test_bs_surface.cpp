#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "exoval/black_scholes.hpp"
#include "exoval/error.hpp"
#include "exoval/heston_cf.hpp"
#include "exoval/surface.hpp"

using namespace exoval;

namespace {

const MarketState kMarket{100.0, 0.02, 0.0};

SurfaceGrid random_surface(const SurfaceMask& mask, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.1, 0.6);
    std::vector<double> v(mask.count());
    for (double& x : v) x = u(rng);
    return SurfaceGrid::from_active_vols(mask, v);
}

// Call value by Simpson integration of the payoff against the lognormal
// terminal density, independent of the closed form.
double lognormal_call(double S, double K, double r, double T, double sigma) {
    const double m = std::log(S) + (r - 0.5 * sigma * sigma) * T;
    const double s = sigma * std::sqrt(T);
    const double lo = std::log(K), hi = m + 12.0 * s;
    const int n = 20000;
    const double h = (hi - lo) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + i * h;
        const double f = (std::exp(x) - K) * std::exp(-0.5 * std::pow((x - m) / s, 2)) / (s * std::sqrt(2 * std::numbers::pi));
        acc += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
    }
    return std::exp(-r * T) * acc * h / 3.0;
}

}  // namespace

// Black-Scholes --------------------------------------------------------------

TEST(BlackScholes, ZeroVolAtTheMoneyForwardIsWorthless) {
    EXPECT_DOUBLE_EQ(bs_call(100, 100, 0, 0, 1, 0), 0.0);
}

TEST(BlackScholes, VanishingStrikeGivesTheAsset) {
    EXPECT_NEAR(bs_call(100, 1e-10, 0.03, 0, 1, 0.2), 100.0, 1e-9);
}

TEST(BlackScholes, AtTheMoneyMatchesLognormalIntegration) {
    const double closed = bs_call(100, 100, 0, 0, 1, 0.2);
    EXPECT_NEAR(closed, 7.9656, 5e-5);
    EXPECT_NEAR(closed, lognormal_call(100, 100, 0, 1, 0.2), 1e-8);
    EXPECT_NEAR(bs_call(100, 90, 0.03, 0, 0.5, 0.35), lognormal_call(100, 90, 0.03, 0.5, 0.35), 1e-8);
}

TEST(BlackScholes, PutCallParity) {
    for (double K : {70.0, 100.0, 130.0}) {
        const double c = bs_call(100, K, 0.03, 0.01, 0.7, 0.25);
        const double p = bs_put(100, K, 0.03, 0.01, 0.7, 0.25);
        EXPECT_NEAR(c - p, 100 * std::exp(-0.01 * 0.7) - K * std::exp(-0.03 * 0.7), 1e-10);
    }
}

TEST(BlackScholes, VegaMatchesFiniteDifference) {
    const double h = 1e-5;
    const double fd = (bs_call(100, 110, 0.02, 0, 1.5, 0.3 + h) - bs_call(100, 110, 0.02, 0, 1.5, 0.3 - h)) / (2 * h);
    EXPECT_NEAR(bs_vega(100, 110, 0.02, 0, 1.5, 0.3), fd, 1e-6);
}

TEST(ImpliedVol, RoundTrip) {
    EXPECT_NEAR(implied_vol(bs_call(100, 100, 0.02, 0, 1, 0.2), 100, 100, 0.02, 0, 1), 0.2, 1e-8);
    for (double sigma : {0.05, 0.3, 1.0})
        for (double K : {70.0, 100.0, 130.0})
            for (double T : {0.05, 0.5, 2.0}) {
                // Deep in-the-money calls are inverted through the put side.
                const auto type = K < 100 * std::exp(0.01 * T) ? OptionType::put : OptionType::call;
                const double v = bs_price(type, 100, K, 0.01, 0, T, sigma);
                EXPECT_NEAR(implied_vol(v, 100, K, 0.01, 0, T, type), sigma, 1e-6) << K << ' ' << T;
            }
}

TEST(ImpliedVol, OutOfTheMoneyPutKeepsPrecision) {
    const double p = bs_put(100, 70, 0.02, 0, 1.0 / 12, 0.15);
    ASSERT_GT(p, 0.0);
    EXPECT_NEAR(implied_vol(p, 100, 70, 0.02, 0, 1.0 / 12, OptionType::put), 0.15, 1e-6);
}

TEST(ImpliedVol, BoundaryPricesThrow) {
    const double intrinsic = 100 - 90 * std::exp(-0.02);
    EXPECT_THROW(implied_vol(intrinsic, 100, 90, 0.02, 0, 1), ArbitrageError);
    EXPECT_THROW(implied_vol(100.0, 100, 90, 0.02, 0, 1), ArbitrageError);
    EXPECT_THROW(implied_vol(-1.0, 100, 90, 0.02, 0, 1), ArbitrageError);
}

TEST(ImpliedVol, HestonAtTheMoneyPriceIsReproduced) {
    SamplerConfig cfg;
    for (std::uint64_t i = 0; i < 20; ++i) {
        Rng rng = substream(31, i);
        const auto d = sample_model(cfg, ModelKind::heston, rng);
        const double price = cf_european_price(d.params, d.market, d.market.spot, 1.0);
        const double v = implied_vol(price, d.market.spot, d.market.spot, d.market.rate, 0, 1.0);
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 2.0);
        EXPECT_NEAR(bs_call(d.market.spot, d.market.spot, d.market.rate, 0, 1.0, v), price, 1e-10);
    }
}

// Masks ----------------------------------------------------------------------

TEST(SurfaceMask, Snp19ExcludesShortDatedWings) {
    const auto m = SurfaceMask::snp19();
    EXPECT_EQ(m.count(), 19u);
    for (std::size_t j : {0, 1, 3, 4}) EXPECT_FALSE(m.active(node_index(0, j)));
    EXPECT_TRUE(m.active(node_index(0, 2)));
    for (std::size_t j : {0, 4}) EXPECT_FALSE(m.active(node_index(1, j)));
    for (std::size_t j : {1, 2, 3}) EXPECT_TRUE(m.active(node_index(1, j)));
    for (std::size_t i = 2; i < kGridMaturities; ++i)
        for (std::size_t j = 0; j < kGridMoneyness; ++j) EXPECT_TRUE(m.active(node_index(i, j)));
    EXPECT_EQ(m.source(node_index(0, 0)), node_index(2, 0));
    EXPECT_EQ(m.source(node_index(0, 1)), node_index(1, 1));
}

TEST(SurfaceMask, ParsesNames) {
    EXPECT_EQ(parse_mask("full"), SurfaceMask::full());
    EXPECT_EQ(parse_mask("19"), SurfaceMask::snp19());
    EXPECT_THROW(parse_mask("7"), ConfigError);
}

TEST(SurfaceGrid, ValidateRejectsVolsOutsideRange) {
    auto s = random_surface(SurfaceMask::full(), 1);
    EXPECT_NO_THROW(s.validate());
    s.vols[7] = 2.5;
    EXPECT_THROW(s.validate(), NumericError);
}

// Model surfaces ---------------------------------------------------------------

TEST(ModelSurface, DeterministicHestonIsFlat) {
    const HestonParams h{0.0625, 1.5, 0.0625, 1e-8, -0.5};
    const auto s = model_surface(h, kMarket, SurfaceMask::full());
    for (double v : s.vols) EXPECT_NEAR(v, 0.25, 1e-4);
}

TEST(ModelSurface, BatesWithoutJumpsEqualsHeston) {
    const HestonParams h{0.05, 1.2, 0.06, 0.5, -0.6};
    const auto a = model_surface(h, kMarket, SurfaceMask::full());
    const auto b = model_surface(BatesParams{h, 0.0, -0.05, 0.05}, kMarket, SurfaceMask::full());
    for (std::size_t n = 0; n < kGridNodes; ++n) EXPECT_NEAR(a.vols[n], b.vols[n], 1e-8);
}

TEST(ModelSurface, JumpsSteepenTheOneMonthSmileOnGoldenPanel) {
    std::ifstream in(std::string(EXOVAL_TEST_DATA) + "/smile_convexity_1m.csv");
    ASSERT_TRUE(in) << "missing golden file";
    std::string line;
    std::getline(in, line);
    const auto convexity = [](const SurfaceGrid& s) { return s.vols[1] + s.vols[3] - 2 * s.vols[2]; };
    double heston = 0.0, bates = 0.0;
    int rows = 0;
    SamplerConfig cfg;
    while (std::getline(in, line)) {
        int i;
        double gh, gb;
        ASSERT_EQ(std::sscanf(line.c_str(), "%d,%lf,%lf", &i, &gh, &gb), 3);
        Rng rng = substream(2024, static_cast<std::uint64_t>(i));
        const auto d = sample_model(cfg, ModelKind::bates, rng);
        const auto& b = std::get<BatesParams>(d.params);
        const double ch = convexity(model_surface(b.heston, d.market, SurfaceMask::full()));
        const double cb = convexity(model_surface(b, d.market, SurfaceMask::full()));
        EXPECT_NEAR(ch, gh, 1e-8);
        EXPECT_NEAR(cb, gb, 1e-8);
        heston += ch;
        bates += cb;
        ++rows;
    }
    EXPECT_EQ(rows, 10);
    EXPECT_GE(bates, heston);
}

TEST(ModelSurface, FourierAgreesWithLargeSimulation) {
    SamplerConfig cfg;
    std::vector<double> strikes;
    for (double m : kMoneyness) strikes.push_back(m * 100.0);
    for (std::uint64_t i = 0; i < 5; ++i) {
        Rng rng = substream(77, i);
        const auto d = sample_model(cfg, ModelKind::heston, rng);
        const auto cf = model_surface(d.params, d.market, SurfaceMask::full());
        McConfig mc;
        mc.numPaths = 200000;
        mc.stepsPerYear = 1000;  // keeps the Euler bias well below the standard error
        mc.seed = 100 + i;
        const auto grid = mc_vanilla_grid(d.params, d.market, kMaturities, strikes, mc);
        for (std::size_t t = 0; t < kGridMaturities; ++t)
            for (std::size_t j = 0; j < kGridMoneyness; ++j) {
                const double T = kMaturities[t], K = strikes[j];
                const bool put = K < 100.0 * std::exp(d.market.rate * T);
                const auto& est = grid[node_index(t, j)];
                const auto& p = put ? est.put : est.call;
                // Compared in price space: deep out-of-the-money estimates can be zero.
                const auto type = put ? OptionType::put : OptionType::call;
                const double fourier = bs_price(type, 100.0, K, d.market.rate, 0.0, T, cf.vols[node_index(t, j)]);
                // 4 standard errors keeps the family of 125 x 5 comparisons honest. The
                // 1e-4 floor covers wings hit by a handful of paths, where the sample
                // standard error is itself unreliable.
                EXPECT_LE(std::abs(p.price - fourier), 4 * p.stdError + 1e-4)
                    << "draw " << i << " node " << node_index(t, j);
            }
    }
}

// Interpolation ----------------------------------------------------------------

TEST(Interpolate, ReproducesNodes) {
    const auto s = random_surface(SurfaceMask::full(), 3);
    for (std::size_t i = 0; i < kGridMaturities; ++i)
        for (std::size_t j = 0; j < kGridMoneyness; ++j)
            EXPECT_EQ(interpolate(s, kMoneyness[j] * 120.0, kMaturities[i], 120.0), s.vols[node_index(i, j)]);
}

TEST(Interpolate, CellMidpointIsTheAverage) {
    const auto s = random_surface(SurfaceMask::full(), 4);
    const double T = 0.5 * (kMaturities[1] + kMaturities[2]);
    const double m = 0.5 * (kMoneyness[2] + kMoneyness[3]);
    const double avg = 0.25 * (s.vols[node_index(1, 2)] + s.vols[node_index(1, 3)] + s.vols[node_index(2, 2)] +
                               s.vols[node_index(2, 3)]);
    EXPECT_NEAR(interpolate(s, m * 100, T, 100), avg, 1e-15);
}

TEST(Interpolate, FlatSurfaceIsConstantEverywhere) {
    std::vector<double> flat(25, 0.3);
    const auto s = SurfaceGrid::from_active_vols(SurfaceMask::full(), flat);
    Rng rng(5);
    std::uniform_real_distribution<double> k(50, 150), t(0.01, 3);
    for (int i = 0; i < 100; ++i) EXPECT_NEAR(interpolate(s, k(rng), t(rng), 100), 0.3, 1e-15);
}

TEST(Interpolate, ClampsOutsideTheHull) {
    const auto s = random_surface(SurfaceMask::full(), 6);
    EXPECT_EQ(interpolate(s, 50, 5.0, 100), s.vols[node_index(4, 0)]);
    EXPECT_EQ(interpolate(s, 200, 0.01, 100), s.vols[node_index(0, 4)]);
}

TEST(Interpolate, IsLinearInNodeVols) {
    const auto a = random_surface(SurfaceMask::full(), 7);
    const auto b = random_surface(SurfaceMask::full(), 8);
    const double alpha = 0.3, beta = -1.7;
    std::vector<double> mix(25);
    for (std::size_t n = 0; n < 25; ++n) mix[n] = alpha * a.vols[n] + beta * b.vols[n];
    const auto c = SurfaceGrid::from_active_vols(SurfaceMask::full(), mix);
    Rng rng(9);
    std::uniform_real_distribution<double> k(70, 130), t(0.08, 2);
    for (int i = 0; i < 50; ++i) {
        const double K = k(rng), T = t(rng);
        EXPECT_NEAR(interpolate(c, K, T, 100), alpha * interpolate(a, K, T, 100) + beta * interpolate(b, K, T, 100),
                    1e-13);
    }
}

TEST(Interpolate, InactiveNodesUseTheirSource) {
    const auto s = random_surface(SurfaceMask::snp19(), 10);
    EXPECT_EQ(interpolate(s, 70, 1.0 / 12, 100), s.vols[node_index(2, 0)]);
}

// Fitting ------------------------------------------------------------------------

namespace {

std::vector<OptionQuote> quotes_from(const SurfaceGrid& s, int perCell, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<OptionQuote> q;
    for (std::size_t i = 0; i + 1 < kGridMaturities; ++i)
        for (std::size_t j = 0; j + 1 < kGridMoneyness; ++j)
            for (int c = 0; c < perCell; ++c) {
                const double T = kMaturities[i] + u(rng) * (kMaturities[i + 1] - kMaturities[i]);
                const double K = 100 * (kMoneyness[j] + u(rng) * (kMoneyness[j + 1] - kMoneyness[j]));
                q.push_back({T, K, 100.0, interpolate(s, K, T, 100.0), "d"});
            }
    return q;
}

double residual(std::span<const OptionQuote> quotes, const SurfaceGrid& s) {
    double r = 0.0;
    for (const auto& q : quotes) r += std::pow(interpolate(s, q.strike, q.maturity, q.spot) - q.impliedVol, 2);
    return r;
}

}  // namespace

TEST(FitSurface, QuotesAtNodesRecoverTheNodes) {
    for (const auto& mask : {SurfaceMask::full(), SurfaceMask::snp19()}) {
        const auto s = random_surface(mask, 11);
        std::vector<OptionQuote> q;
        for (std::size_t n : mask.active_nodes())
            q.push_back({kMaturities[n / 5], kMoneyness[n % 5] * 100, 100.0, s.vols[n], "d"});
        const auto fit = fit_surface(q, mask);
        for (std::size_t n : mask.active_nodes()) EXPECT_NEAR(fit.surface.vols[n], s.vols[n], 1e-10);
        for (bool f : fit.flagged) EXPECT_FALSE(f);
    }
}

TEST(FitSurface, InterpolatedQuotesRecoverTheNodes) {
    const auto s = random_surface(SurfaceMask::full(), 12);
    const auto q = quotes_from(s, 6, 13);
    const auto fit = fit_surface(q, SurfaceMask::full());
    EXPECT_EQ(fit.rank, 25u);
    for (std::size_t n = 0; n < kGridNodes; ++n) EXPECT_NEAR(fit.surface.vols[n], s.vols[n], 1e-8);
    EXPECT_LT(fit.residual, 1e-20);
}

TEST(FitSurface, SingleQuoteDeterminesOnlyItsCell) {
    const OptionQuote q{0.75, 107.5, 100.0, 0.22, "d"};
    const auto fit = fit_surface(std::span(&q, 1), SurfaceMask::full());
    const std::array<std::size_t, 4> cell{node_index(2, 2), node_index(2, 3), node_index(3, 2), node_index(3, 3)};
    for (std::size_t n = 0; n < kGridNodes; ++n) {
        const bool incident = std::find(cell.begin(), cell.end(), n) != cell.end();
        EXPECT_EQ(fit.flagged[n], !incident) << n;
    }
    EXPECT_NEAR(interpolate(fit.surface, q.strike, q.maturity, q.spot), 0.22, 1e-12);
    EXPECT_LT(fit.residual, 1e-24);
}

TEST(FitSurface, ResidualBeatsPerturbedNodes) {
    const auto s = random_surface(SurfaceMask::full(), 14);
    auto q = quotes_from(s, 5, 15);
    Rng rng(16);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (auto& x : q) x.impliedVol += noise(rng);
    const auto fit = fit_surface(q, SurfaceMask::full());
    EXPECT_NEAR(fit.residual, residual(q, fit.surface), 1e-12);
    for (int trial = 0; trial < 50; ++trial) {
        auto v = fit.surface.active_vols();
        for (double& x : v) x += noise(rng);
        EXPECT_LE(fit.residual, residual(q, SurfaceGrid::from_active_vols(SurfaceMask::full(), v)));
    }
}

TEST(FitSurface, RejectsEmptyAndOutsideQuotes) {
    EXPECT_THROW(fit_surface({}, SurfaceMask::full()), ConfigError);
    const OptionQuote wide{1.0, 150.0, 100.0, 0.2, "d"};
    EXPECT_THROW(fit_surface(std::span(&wide, 1), SurfaceMask::full()), ConfigError);
}

// CSV ------------------------------------------------------------------------------

TEST(SurfaceCsv, SurfaceRoundTrip) {
    const auto s = random_surface(SurfaceMask::snp19(), 17);
    std::stringstream io;
    write_surface_csv(io, s);
    const auto back = read_surface_csv(io);
    EXPECT_EQ(back.mask, s.mask);
    for (std::size_t n : s.mask.active_nodes()) EXPECT_EQ(back.vols[n], s.vols[n]);
}

TEST(SurfaceCsv, PanelRoundTrip) {
    std::vector<SurfaceDay> days{{"2019-01-02", {2510.0, 0.024, 0.0}, random_surface(SurfaceMask::snp19(), 18)},
                                 {"2019-01-03", {2447.9, 0.025, 0.0}, random_surface(SurfaceMask::snp19(), 19)}};
    std::stringstream io;
    write_surface_panel_csv(io, days);
    const auto back = read_surface_panel_csv(io);
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t d = 0; d < 2; ++d) {
        EXPECT_EQ(back[d].id, days[d].id);
        EXPECT_EQ(back[d].market.spot, days[d].market.spot);
        EXPECT_EQ(back[d].market.rate, days[d].market.rate);
        EXPECT_EQ(back[d].surface.active_vols(), days[d].surface.active_vols());
    }
}

TEST(SurfaceCsv, ReadsQuotesAndRejectsBadHeader) {
    std::istringstream ok("date,T_years,strike,spot,implied_vol\n2019-01-02,0.5,2400,2500,0.18\n");
    const auto q = read_quotes_csv(ok);
    ASSERT_EQ(q.size(), 1u);
    EXPECT_EQ(q[0].date, "2019-01-02");
    EXPECT_DOUBLE_EQ(q[0].strike, 2400.0);
    EXPECT_DOUBLE_EQ(q[0].impliedVol, 0.18);
    std::istringstream bad("date,T,strike\n1,2,3\n");
    EXPECT_THROW(read_quotes_csv(bad), ConfigError);
}
