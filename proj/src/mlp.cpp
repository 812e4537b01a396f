#include "exoval/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "exoval/error.hpp"
#include "exoval/rng.hpp"

namespace exoval {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_widths(const std::vector<std::size_t>& widths) {
    if (widths.size() < 2) throw ConfigError("network needs at least an input and an output layer");
    if (widths.back() != 1) throw ConfigError("network output width must be 1");
    for (std::size_t w : widths)
        if (w == 0) throw ConfigError("layer widths must be positive");
}

// Per-sample activations kept for the backward pass. acts[0] is the input,
// acts[l] the output of layer l.
struct Tape {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> deltas;

    explicit Tape(const std::vector<std::size_t>& widths) {
        for (std::size_t w : widths) {
            acts.emplace_back(w, 0.0);
            deltas.emplace_back(w, 0.0);
        }
    }
};

double run_forward(const std::vector<DenseLayer>& layers, std::span<const double> x, Tape& tape) {
    std::copy(x.begin(), x.end(), tape.acts[0].begin());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const DenseLayer& L = layers[l];
        const std::vector<double>& a = tape.acts[l];
        std::vector<double>& z = tape.acts[l + 1];
        const bool hidden = l + 1 < layers.size();
        for (std::size_t o = 0; o < L.out; ++o) {
            const double* w = &L.weights[o * L.in];
            double s = L.bias[o];
            for (std::size_t i = 0; i < L.in; ++i) s += w[i] * a[i];
            z[o] = hidden ? sigmoid(s) : s;
        }
    }
    return tape.acts.back()[0];
}

// Propagates d(output)/d(output) = seed back to every layer's input; after the
// call tape.deltas[l] holds d(seed*output)/d(acts[l]) for l < last and the
// pre-activation deltas are consumed by `onLayer(l, preDelta)`.
template <class OnLayer>
void run_backward(const std::vector<DenseLayer>& layers, Tape& tape, double seed, OnLayer&& onLayer) {
    std::vector<double> pre{seed};
    for (std::size_t l = layers.size(); l-- > 0;) {
        const DenseLayer& L = layers[l];
        onLayer(l, pre);
        std::vector<double>& down = tape.deltas[l];
        std::fill(down.begin(), down.end(), 0.0);
        for (std::size_t o = 0; o < L.out; ++o) {
            const double* w = &L.weights[o * L.in];
            const double d = pre[o];
            for (std::size_t i = 0; i < L.in; ++i) down[i] += w[i] * d;
        }
        if (l > 0) {
            const std::vector<double>& a = tape.acts[l];
            pre.assign(L.in, 0.0);
            for (std::size_t i = 0; i < L.in; ++i) pre[i] = down[i] * a[i] * (1.0 - a[i]);
        }
    }
}

struct AdamState {
    std::vector<std::vector<double>> mW, vW, mb, vb;

    explicit AdamState(const std::vector<DenseLayer>& layers) {
        for (const DenseLayer& L : layers) {
            mW.emplace_back(L.weights.size(), 0.0);
            vW.emplace_back(L.weights.size(), 0.0);
            mb.emplace_back(L.bias.size(), 0.0);
            vb.emplace_back(L.bias.size(), 0.0);
        }
    }
};

void adam_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m, std::vector<double>& v,
                 const TrainConfig& cfg, double c1, double c2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        p[i] -= cfg.learningRate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
}

double median(std::vector<double> x) {
    const std::size_t mid = x.size() / 2;
    std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid), x.end());
    double m = x[mid];
    if (x.size() % 2 == 0) m = 0.5 * (m + *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mid)));
    return m;
}

}  // namespace

// Mlp ---------------------------------------------------------------------------

Mlp Mlp::zeros(std::vector<std::size_t> widths) {
    check_widths(widths);
    Mlp net;
    net.widths_ = std::move(widths);
    for (std::size_t l = 0; l + 1 < net.widths_.size(); ++l) {
        DenseLayer L;
        L.in = net.widths_[l];
        L.out = net.widths_[l + 1];
        L.weights.assign(L.in * L.out, 0.0);
        L.bias.assign(L.out, 0.0);
        net.layers_.push_back(std::move(L));
    }
    return net;
}

Mlp::Mlp(std::vector<std::size_t> widths, std::uint64_t seed) : Mlp(zeros(std::move(widths))) {
    Rng rng(derive_seed(seed, stream_tag("glorot")));
    for (DenseLayer& L : layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& w : L.weights) w = u(rng);
    }
}

Mlp Mlp::standard(std::size_t inputs, std::uint64_t seed) { return Mlp({inputs, 30, 30, 30, 1}, seed); }

double Mlp::forward(std::span<const double> features) const {
    if (features.size() != inputs())
        throw ConfigError("network expects " + std::to_string(inputs()) + " features, got " +
                          std::to_string(features.size()));
    Tape tape(widths_);
    return run_forward(layers_, features, tape);
}

std::vector<double> Mlp::gradient(std::span<const double> features) const {
    if (features.size() != inputs())
        throw ConfigError("network expects " + std::to_string(inputs()) + " features, got " +
                          std::to_string(features.size()));
    Tape tape(widths_);
    run_forward(layers_, features, tape);
    run_backward(layers_, tape, 1.0, [](std::size_t, const std::vector<double>&) {});
    return tape.deltas[0];
}

// Normalizer --------------------------------------------------------------------

Normalizer Normalizer::fit(const std::vector<std::vector<double>>& rows, std::span<const double> targets) {
    if (rows.empty()) throw ConfigError("cannot fit a normalizer to an empty set");
    const std::size_t d = rows.front().size();
    const double n = static_cast<double>(rows.size());
    Normalizer nz;
    nz.mean.assign(d, 0.0);
    nz.stdDev.assign(d, 0.0);
    nz.constant.assign(d, false);
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) nz.mean[j] += r[j];
    for (double& m : nz.mean) m /= n;
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) nz.stdDev[j] += (r[j] - nz.mean[j]) * (r[j] - nz.mean[j]);
    for (std::size_t j = 0; j < d; ++j) {
        nz.stdDev[j] = std::sqrt(nz.stdDev[j] / n);
        if (!(nz.stdDev[j] > 1e-12 * std::max(1.0, std::abs(nz.mean[j])))) {
            nz.stdDev[j] = 1.0;
            nz.constant[j] = true;
        }
    }
    if (!targets.empty()) {
        const double tm = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
        double var = 0.0;
        for (double t : targets) var += (t - tm) * (t - tm);
        const double sd = std::sqrt(var / static_cast<double>(targets.size()));
        nz.targetScale = sd > 1e-12 ? sd : 1.0;
    }
    return nz;
}

std::vector<double> Normalizer::normalize(std::span<const double> x) const {
    if (x.size() != mean.size()) throw ConfigError("feature count does not match the normalizer");
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / stdDev[j];
    return z;
}

std::vector<double> Normalizer::denormalize(std::span<const double> z) const {
    if (z.size() != mean.size()) throw ConfigError("feature count does not match the normalizer");
    std::vector<double> x(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) x[j] = z[j] * stdDev[j] + mean[j];
    return x;
}

// TrainConfig -------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(learningRate > 0.0)) throw ConfigError("learningRate must be positive");
    if (batchSize == 0) throw ConfigError("batchSize must be positive");
    if (maxEpochs < 1) throw ConfigError("maxEpochs must be at least 1");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (!(valFraction > 0.0 && valFraction < 0.5)) throw ConfigError("valFraction must lie in (0, 0.5)");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"learningRate", c.learningRate}, {"batchSize", c.batchSize}, {"maxEpochs", c.maxEpochs},
         {"patience", c.patience},         {"valFraction", c.valFraction}, {"seed", c.seed},
         {"beta1", c.beta1},               {"beta2", c.beta2},         {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (j.contains("learningRate")) c.learningRate = j.at("learningRate").get<double>();
    if (j.contains("batchSize")) c.batchSize = j.at("batchSize").get<std::size_t>();
    if (j.contains("maxEpochs")) c.maxEpochs = j.at("maxEpochs").get<int>();
    if (j.contains("patience")) c.patience = j.at("patience").get<int>();
    if (j.contains("valFraction")) c.valFraction = j.at("valFraction").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("beta1")) c.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) c.beta2 = j.at("beta2").get<double>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
}

// Surrogate ---------------------------------------------------------------------

double Surrogate::predict(std::span<const double> features) const {
    return net.forward(normalizer.normalize(features)) * normalizer.targetScale;
}

std::vector<double> Surrogate::input_gradient(std::span<const double> features) const {
    std::vector<double> g = net.gradient(normalizer.normalize(features));
    for (std::size_t j = 0; j < g.size(); ++j) g[j] *= normalizer.targetScale / normalizer.stdDev[j];
    return g;
}

void to_json(nlohmann::json& j, const Surrogate& s) {
    nlohmann::json layers = nlohmann::json::array();
    for (const DenseLayer& L : s.net.layers())
        layers.push_back({{"in", L.in}, {"out", L.out}, {"weights", L.weights}, {"bias", L.bias}});
    std::vector<int> constant(s.normalizer.constant.begin(), s.normalizer.constant.end());
    j = {{"widths", s.net.widths()},
         {"layers", layers},
         {"normalizer",
          {{"mean", s.normalizer.mean},
           {"std", s.normalizer.stdDev},
           {"constant", constant},
           {"targetScale", s.normalizer.targetScale}}},
         {"metadata", s.metadata}};
}

void from_json(const nlohmann::json& j, Surrogate& s) {
    Mlp net = Mlp::zeros(j.at("widths").get<std::vector<std::size_t>>());
    const auto& layers = j.at("layers");
    if (layers.size() != net.layers().size()) throw ConfigError("weights file: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        DenseLayer& L = net.layers()[l];
        auto w = layers[l].at("weights").get<std::vector<double>>();
        auto b = layers[l].at("bias").get<std::vector<double>>();
        if (w.size() != L.weights.size() || b.size() != L.bias.size())
            throw ConfigError("weights file: layer " + std::to_string(l) + " has the wrong shape");
        for (double x : w)
            if (!std::isfinite(x)) throw ConfigError("weights file: non-finite weight");
        L.weights = std::move(w);
        L.bias = std::move(b);
    }
    const auto& nz = j.at("normalizer");
    Normalizer norm;
    norm.mean = nz.at("mean").get<std::vector<double>>();
    norm.stdDev = nz.at("std").get<std::vector<double>>();
    for (int c : nz.at("constant").get<std::vector<int>>()) norm.constant.push_back(c != 0);
    norm.targetScale = nz.at("targetScale").get<double>();
    if (norm.mean.size() != net.inputs() || norm.stdDev.size() != net.inputs() || norm.constant.size() != net.inputs())
        throw ConfigError("weights file: normalizer size does not match the network");
    s.net = std::move(net);
    s.normalizer = std::move(norm);
    s.metadata = j.value("metadata", nlohmann::json::object());
}

// Training ----------------------------------------------------------------------

double mean_absolute_error(const Surrogate& model, const std::vector<std::vector<double>>& features,
                           std::span<const double> targets) {
    if (features.size() != targets.size() || features.empty())
        throw ConfigError("features and targets must be nonempty and of equal length");
    double s = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) s += std::abs(model.predict(features[i]) - targets[i]);
    return s / static_cast<double>(features.size());
}

TrainResult train(const std::vector<std::vector<double>>& features, std::span<const double> targets,
                  const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t n = features.size();
    if (n < 100) throw ConfigError("training needs at least 100 rows, got " + std::to_string(n));
    if (targets.size() != n) throw ConfigError("feature and target counts differ");
    const std::size_t d = features.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        if (features[i].size() != d) throw ConfigError("ragged feature rows");
        for (double x : features[i])
            if (!std::isfinite(x)) throw ConfigError("non-finite feature in row " + std::to_string(i));
        if (!std::isfinite(targets[i])) throw ConfigError("non-finite target in row " + std::to_string(i));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng splitRng(derive_seed(cfg.seed, stream_tag("split")));
    std::shuffle(order.begin(), order.end(), splitRng);
    const auto nVal = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.valFraction * n)));
    std::vector<std::size_t> valRows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nVal));
    std::vector<std::size_t> trainRows(order.begin() + static_cast<std::ptrdiff_t>(nVal), order.end());

    std::vector<std::vector<double>> trainX;
    std::vector<double> trainT;
    for (std::size_t r : trainRows) {
        trainX.push_back(features[r]);
        trainT.push_back(targets[r]);
    }

    TrainResult result;
    Surrogate& model = result.model;
    model.normalizer = Normalizer::fit(trainX, trainT);
    const double scale = model.normalizer.targetScale;

    std::vector<std::vector<double>> z(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = model.normalizer.normalize(features[i]);
        y[i] = targets[i] / scale;
    }

    Mlp net = Mlp::standard(d, derive_seed(cfg.seed, stream_tag("init")));
    {
        std::vector<double> ty;
        for (std::size_t r : trainRows) ty.push_back(y[r]);
        net.layers().back().bias[0] = median(std::move(ty));
    }

    std::vector<std::vector<double>> gW, gb;
    for (const DenseLayer& L : net.layers()) {
        gW.emplace_back(L.weights.size(), 0.0);
        gb.emplace_back(L.bias.size(), 0.0);
    }
    AdamState adam(net.layers());
    Tape tape(net.widths());
    Rng shuffleRng(derive_seed(cfg.seed, stream_tag("shuffle")));

    auto validation_loss = [&](const Mlp& m) {
        double s = 0.0;
        for (std::size_t r : valRows) s += std::abs(run_forward(m.layers(), z[r], tape) - y[r]);
        return s / static_cast<double>(valRows.size()) * scale;
    };

    TrainHistory& h = result.history;
    Mlp best = net;
    h.bestValLoss = validation_loss(net);
    h.bestEpoch = 0;
    long step = 0;
    std::vector<std::size_t> batchOrder = trainRows;
    for (int epoch = 1; epoch <= cfg.maxEpochs; ++epoch) {
        std::shuffle(batchOrder.begin(), batchOrder.end(), shuffleRng);
        double trainSum = 0.0;
        for (std::size_t start = 0; start < batchOrder.size(); start += cfg.batchSize) {
            const std::size_t stop = std::min(batchOrder.size(), start + cfg.batchSize);
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (auto& g : gW) std::fill(g.begin(), g.end(), 0.0);
            for (auto& g : gb) std::fill(g.begin(), g.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t r = batchOrder[b];
                const double err = run_forward(net.layers(), z[r], tape) - y[r];
                trainSum += std::abs(err);
                const double sgn = err > 0.0 ? inv : (err < 0.0 ? -inv : 0.0);
                if (sgn == 0.0) continue;
                run_backward(net.layers(), tape, sgn, [&](std::size_t l, const std::vector<double>& pre) {
                    const DenseLayer& L = net.layers()[l];
                    const std::vector<double>& a = tape.acts[l];
                    for (std::size_t o = 0; o < L.out; ++o) {
                        double* g = &gW[l][o * L.in];
                        for (std::size_t i = 0; i < L.in; ++i) g[i] += pre[o] * a[i];
                        gb[l][o] += pre[o];
                    }
                });
            }
            ++step;
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t l = 0; l < net.layers().size(); ++l) {
                adam_update(net.layers()[l].weights, gW[l], adam.mW[l], adam.vW[l], cfg, c1, c2);
                adam_update(net.layers()[l].bias, gb[l], adam.mb[l], adam.vb[l], cfg, c1, c2);
            }
        }
        const double trainLoss = trainSum / static_cast<double>(batchOrder.size()) * scale;
        const double valLoss = validation_loss(net);
        if (!std::isfinite(trainLoss) || !std::isfinite(valLoss)) {
            std::ostringstream msg;
            msg << "training diverged at epoch " << epoch << " (train loss " << trainLoss << ", validation loss "
                << valLoss << "); try a smaller learning rate";
            throw NumericError(msg.str());
        }
        h.trainLoss.push_back(trainLoss);
        h.valLoss.push_back(valLoss);
        h.finalValLoss = valLoss;
        if (valLoss < h.bestValLoss) {
            h.bestValLoss = valLoss;
            h.bestEpoch = epoch;
            best = net;
        }
        if (epoch - h.bestEpoch >= cfg.patience) break;
    }

    model.net = std::move(best);
    result.validationRows = std::move(valRows);
    return result;
}

// Sensitivity -------------------------------------------------------------------

SensitivityMatrix sensitivity(const Surrogate& model, const std::vector<std::vector<double>>& panel,
                              std::span<const std::size_t> volFeatures) {
    if (panel.empty()) throw ConfigError("sensitivity needs a nonempty panel");
    const std::size_t m = volFeatures.size();
    std::vector<std::vector<double>> absGrad(panel.size(), std::vector<double>(m));
    std::vector<double> mean(m, 0.0);
    for (std::size_t p = 0; p < panel.size(); ++p) {
        const std::vector<double> g = model.input_gradient(panel[p]);
        for (std::size_t i = 0; i < m; ++i) {
            if (volFeatures[i] >= g.size()) throw ConfigError("volatility feature index out of range");
            absGrad[p][i] = std::abs(g[volFeatures[i]]);
            mean[i] += absGrad[p][i];
        }
    }
    SensitivityMatrix s;
    s.undefined.assign(m, false);
    for (std::size_t i = 0; i < m; ++i) {
        mean[i] /= static_cast<double>(panel.size());
        s.undefined[i] = !(mean[i] > 0.0);
    }
    s.values.assign(panel.size(), std::vector<double>(m, 0.0));
    for (std::size_t p = 0; p < panel.size(); ++p)
        for (std::size_t i = 0; i < m; ++i)
            s.values[p][i] = s.undefined[i] ? std::nan("") : std::abs(absGrad[p][i] / mean[i] - 1.0);
    return s;
}

}  // namespace exoval
