#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "exoval/error.hpp"
#include "exoval/mlp.hpp"
#include "exoval/rng.hpp"

using namespace exoval;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// 2-2-1 net with hand-chosen weights.
Mlp tiny_net() {
    Mlp m = Mlp::zeros({2, 2, 1});
    m.layers()[0].weights = {1.0, 0.5, -1.0, 2.0};
    m.layers()[0].bias = {0.1, -0.2};
    m.layers()[1].weights = {2.0, -1.0};
    m.layers()[1].bias = {0.5};
    return m;
}

struct Data {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
};

// y = 3 v1 + 1 with three distractor inputs.
Data linear_data(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.1, 0.6);
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row{u(rng), u(rng), u(rng), u(rng)};
        d.y.push_back(3 * row[0] + 1);
        d.x.push_back(std::move(row));
    }
    return d;
}

double stddev(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

// Forward pass ---------------------------------------------------------------

TEST(MlpForward, ZeroWeightsReturnTheFinalBias) {
    Mlp m = Mlp::zeros({5, 30, 30, 30, 1});
    m.layers().back().bias = {0.37};
    const std::vector<double> x{1, -2, 3, 0.5, 9};
    EXPECT_DOUBLE_EQ(m.forward(x), 0.37);
}

TEST(MlpForward, HandBuiltNetMatchesManualArithmetic) {
    const std::vector<double> x{0.3, -0.2};
    EXPECT_NEAR(tiny_net().forward(x), 0.5 + 2 * sigmoid(0.3) - sigmoid(-0.9), 1e-15);
    EXPECT_NEAR(tiny_net().forward(x), 1.359834536248322, 1e-14);
}

TEST(MlpForward, StandardArchitecture) {
    const Mlp m = Mlp::standard(28, 1);
    EXPECT_EQ(m.widths(), (std::vector<std::size_t>{28, 30, 30, 30, 1}));
    ASSERT_EQ(m.layers().size(), 4u);
    const double limit = std::sqrt(6.0 / (28 + 30));
    for (double w : m.layers()[0].weights) EXPECT_LE(std::abs(w), limit);
    for (double b : m.layers()[0].bias) EXPECT_EQ(b, 0.0);
}

TEST(MlpForward, DimensionMismatchThrows) {
    const std::vector<double> x{1.0, 2.0, 3.0};
    EXPECT_THROW(tiny_net().forward(x), ConfigError);
    EXPECT_THROW(tiny_net().gradient(x), ConfigError);
}

TEST(MlpForward, LipschitzBound) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Mlp m = Mlp::standard(6, seed);
        double L = 1.0;
        for (std::size_t l = 0; l < m.layers().size(); ++l) {
            const auto& layer = m.layers()[l];
            double norm = 0.0;
            for (std::size_t o = 0; o < layer.out; ++o) {
                double row = 0.0;
                for (std::size_t i = 0; i < layer.in; ++i) row += std::abs(layer.weights[o * layer.in + i]);
                norm = std::max(norm, row);
            }
            L *= norm * (l + 1 < m.layers().size() ? 0.25 : 1.0);
        }
        Rng rng(seed);
        std::normal_distribution<double> z;
        std::vector<double> x(6);
        for (double& v : x) v = z(rng);
        auto y = x;
        y[seed % 6] += 1e-9;
        EXPECT_LE(std::abs(m.forward(y) - m.forward(x)), L * 1e-9 * (1 + 1e-6) + 1e-15);
    }
}

// Gradients ------------------------------------------------------------------

TEST(MlpGradient, MatchesCentralDifferences) {
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Rng rng = substream(42, trial);
        const std::size_t d = 2 + trial % 27;
        const Mlp m = Mlp::standard(d, trial);
        std::normal_distribution<double> z;
        std::vector<double> x(d);
        for (double& v : x) v = z(rng);
        const auto g = m.gradient(x);
        for (std::size_t j = 0; j < d; ++j) {
            auto up = x, dn = x;
            up[j] += 1e-4;
            dn[j] -= 1e-4;
            const double fd = (m.forward(up) - m.forward(dn)) / 2e-4;
            worst = std::max(worst, std::abs(g[j] - fd) / std::max({std::abs(g[j]), std::abs(fd), 1e-6}));
        }
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(MlpGradient, IgnoredInputHasZeroGradient) {
    Mlp m = Mlp::standard(5, 3);
    auto& first = m.layers()[0];
    for (std::size_t o = 0; o < first.out; ++o) first.weights[o * first.in + 2] = 0.0;
    const std::vector<double> x{0.1, -0.4, 7.0, 0.3, 1.2};
    EXPECT_EQ(m.gradient(x)[2], 0.0);
}

TEST(MlpGradient, HandBuiltNetMatchesChainRule) {
    const std::vector<double> x{0.3, -0.2};
    const auto g = tiny_net().gradient(x);
    const double d1 = 2 * sigmoid(0.3) * (1 - sigmoid(0.3));
    const double d2 = -sigmoid(-0.9) * (1 - sigmoid(-0.9));
    EXPECT_NEAR(g[0], d1 - d2, 1e-15);
    EXPECT_NEAR(g[1], 0.5 * d1 + 2 * d2, 1e-15);
    EXPECT_NEAR(g[0], 0.6944169307237551, 1e-14);
    EXPECT_NEAR(g[1], -0.166542302993781, 1e-14);
}

TEST(MlpGradient, SurrogateGradientIsInOriginalUnits) {
    const auto data = linear_data(200, 4);
    Surrogate s{Mlp::standard(4, 5), Normalizer::fit(data.x, data.y), {}};
    const std::vector<double> x{0.2, 0.3, 0.4, 0.5};
    const auto g = s.input_gradient(x);
    for (std::size_t j = 0; j < 4; ++j) {
        const double h = 1e-4 * s.normalizer.stdDev[j];
        auto up = x, dn = x;
        up[j] += h;
        dn[j] -= h;
        const double fd = (s.predict(up) - s.predict(dn)) / (2 * h);
        EXPECT_NEAR(g[j], fd, 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

// Normalizer -------------------------------------------------------------------

TEST(Normalizer, RoundTripAndConstantColumns) {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    Rng rng(6);
    std::normal_distribution<double> z(3.0, 2.0);
    for (int i = 0; i < 50; ++i) {
        rows.push_back({z(rng), 5.0, z(rng) * 1e-3});
        y.push_back(z(rng));
    }
    const auto n = Normalizer::fit(rows, y);
    EXPECT_FALSE(n.constant[0]);
    EXPECT_TRUE(n.constant[1]);
    EXPECT_EQ(n.stdDev[1], 1.0);
    EXPECT_GT(n.targetScale, 0.0);
    for (const auto& r : rows) {
        const auto back = n.denormalize(n.normalize(r));
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(back[j], r[j], 1e-12 * std::max(1.0, std::abs(r[j])));
    }
}

// Training ------------------------------------------------------------------------

TEST(Train, RecoversALinearFunction) {
    const auto data = linear_data(5000, 7);
    TrainConfig cfg;
    cfg.seed = 2;
    const auto r = train(data.x, data.y, cfg);
    EXPECT_LT(r.history.bestValLoss, 0.01 * stddev(data.y));
}

TEST(Train, LearnsAConstant) {
    auto data = linear_data(300, 8);
    std::fill(data.y.begin(), data.y.end(), 4.25);
    TrainConfig cfg;
    cfg.maxEpochs = 1000;
    const auto r = train(data.x, data.y, cfg);
    EXPECT_LT(r.history.bestValLoss, 1e-3);
    for (const auto& x : data.x) EXPECT_NEAR(r.model.predict(x), 4.25, 5e-3);
}

TEST(Train, CheckpointAndEarlyStopping) {
    const auto data = linear_data(400, 9);
    TrainConfig cfg;
    cfg.patience = 5;
    cfg.maxEpochs = 400;
    cfg.learningRate = 0.05;
    const auto r = train(data.x, data.y, cfg);
    const auto& h = r.history;
    EXPECT_LE(h.bestValLoss, h.finalValLoss);
    EXPECT_LE(static_cast<int>(h.valLoss.size()) - h.bestEpoch, cfg.patience);
    EXPECT_EQ(h.trainLoss.size(), h.valLoss.size());
    std::vector<std::vector<double>> vx;
    std::vector<double> vy;
    for (std::size_t i : r.validationRows) {
        vx.push_back(data.x[i]);
        vy.push_back(data.y[i]);
    }
    EXPECT_NEAR(mean_absolute_error(r.model, vx, vy), h.bestValLoss, 1e-9);
}

TEST(Train, IsDeterministicForAFixedSeed) {
    const auto data = linear_data(300, 10);
    TrainConfig cfg;
    cfg.maxEpochs = 20;
    cfg.seed = 11;
    const auto a = train(data.x, data.y, cfg);
    const auto b = train(data.x, data.y, cfg);
    for (std::size_t l = 0; l < a.model.net.layers().size(); ++l) {
        EXPECT_EQ(a.model.net.layers()[l].weights, b.model.net.layers()[l].weights);
        EXPECT_EQ(a.model.net.layers()[l].bias, b.model.net.layers()[l].bias);
    }
    EXPECT_EQ(a.history.valLoss, b.history.valLoss);
    cfg.seed = 12;
    const auto c = train(data.x, data.y, cfg);
    EXPECT_NE(a.history.valLoss, c.history.valLoss);
}

TEST(Train, DivergenceAbortsWithNumericError) {
    auto data = linear_data(200, 13);
    for (double& y : data.y) y *= 1e300;
    TrainConfig cfg;
    cfg.learningRate = 1e308;
    cfg.maxEpochs = 10;
    EXPECT_THROW(train(data.x, data.y, cfg), NumericError);
}

TEST(Train, RejectsBadInputs) {
    const auto small = linear_data(50, 14);
    EXPECT_THROW(train(small.x, small.y, TrainConfig{}), ConfigError);
    TrainConfig cfg;
    cfg.valFraction = 0.6;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.patience = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

// Persistence and sensitivity ------------------------------------------------------

TEST(Surrogate, JsonRoundTripIsExact) {
    const auto data = linear_data(200, 15);
    Surrogate s{Mlp::standard(4, 16), Normalizer::fit(data.x, data.y), {{"kind", "asian"}}};
    const nlohmann::json j = s;
    const auto back = nlohmann::json::parse(j.dump()).get<Surrogate>();
    for (const auto& x : data.x) EXPECT_EQ(back.predict(x), s.predict(x));
    EXPECT_EQ(back.metadata["kind"], "asian");
}

TEST(Sensitivity, LinearNetHasZeroSensitivity) {
    Mlp m = Mlp::zeros({3, 1});
    m.layers()[0].weights = {0.5, -2.0, 1.5};
    Surrogate s{m, {}, {}};
    s.normalizer.mean = {0, 0, 0};
    s.normalizer.stdDev = {1, 1, 1};
    s.normalizer.constant = {false, false, false};
    std::vector<std::vector<double>> panel;
    Rng rng(17);
    std::uniform_real_distribution<double> u(0.1, 0.5);
    for (int i = 0; i < 20; ++i) panel.push_back({u(rng), u(rng), u(rng)});
    const std::vector<std::size_t> vols{0, 1, 2};
    const auto r = sensitivity(s, panel, vols);
    for (const auto& row : r.values)
        for (double v : row) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Sensitivity, SingleSurfacePanelIsZeroAndDeadInputsAreFlagged) {
    Mlp m = Mlp::standard(3, 18);
    auto& first = m.layers()[0];
    for (std::size_t o = 0; o < first.out; ++o) first.weights[o * first.in + 1] = 0.0;
    Surrogate s{m, {{0, 0, 0}, {1, 1, 1}, {false, false, false}, 1.0}, {}};
    const std::vector<std::vector<double>> panel{{0.2, 0.3, 0.4}};
    const std::vector<std::size_t> vols{0, 1};
    const auto r = sensitivity(s, panel, vols);
    EXPECT_EQ(r.values[0][0], 0.0);
    EXPECT_TRUE(r.undefined[1]);
    EXPECT_TRUE(std::isnan(r.values[0][1]));
    EXPECT_FALSE(r.undefined[0]);
}
