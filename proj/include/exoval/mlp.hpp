#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace exoval {

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> bias;     // out
};

// Fully connected network: sigmoid hidden units and one linear output unit.
class Mlp {
public:
    Mlp() = default;
    // Glorot-uniform weights from `seed`, zero biases.
    Mlp(std::vector<std::size_t> widths, std::uint64_t seed);
    static Mlp zeros(std::vector<std::size_t> widths);
    // The default architecture: input -> 30 -> 30 -> 30 -> 1.
    static Mlp standard(std::size_t inputs, std::uint64_t seed);

    const std::vector<std::size_t>& widths() const { return widths_; }
    std::size_t inputs() const { return widths_.front(); }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    // Output for already-normalized features. Throws ConfigError on a
    // dimension mismatch.
    double forward(std::span<const double> features) const;
    // d output / d feature by reverse-mode differentiation; weights untouched.
    std::vector<double> gradient(std::span<const double> features) const;

private:
    std::vector<std::size_t> widths_;
    std::vector<DenseLayer> layers_;
};

// Affine feature scaling and a target divisor.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> stdDev;
    std::vector<bool> constant;  // features whose std was zero (std set to 1)
    double targetScale = 1.0;

    static Normalizer fit(const std::vector<std::vector<double>>& rows, std::span<const double> targets);
    std::vector<double> normalize(std::span<const double> x) const;
    std::vector<double> denormalize(std::span<const double> z) const;
};

struct TrainConfig {
    double learningRate = 1e-3;
    // Patience counts epochs, so small training sets need small batches to get
    // enough optimizer steps per epoch before early stopping triggers.
    std::size_t batchSize = 32;
    int maxEpochs = 5000;
    int patience = 50;
    double valFraction = 0.1;
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainHistory {
    std::vector<double> trainLoss;  // MAE in target units, per epoch
    std::vector<double> valLoss;
    int bestEpoch = -1;
    double bestValLoss = 0.0;
    double finalValLoss = 0.0;  // loss of the last-epoch weights
};

// A trained network together with its scaling. Predictions are in target
// units (price as a percent of spot).
struct Surrogate {
    Mlp net;
    Normalizer normalizer;
    nlohmann::json metadata = nlohmann::json::object();

    double predict(std::span<const double> features) const;
    // d prediction / d feature in original (unnormalized) units.
    std::vector<double> input_gradient(std::span<const double> features) const;
};

void to_json(nlohmann::json& j, const Surrogate& s);
void from_json(const nlohmann::json& j, Surrogate& s);

struct TrainResult {
    Surrogate model;  // weights from the best validation epoch
    TrainHistory history;
    std::vector<std::size_t> validationRows;
};

// Adam on mean absolute error with a seeded train/validation split. Weights
// are checkpointed at every new validation low and training stops after
// `patience` epochs without one. Throws NumericError on a non-finite loss.
TrainResult train(const std::vector<std::vector<double>>& features, std::span<const double> targets,
                  const TrainConfig& cfg);

double mean_absolute_error(const Surrogate& model, const std::vector<std::vector<double>>& features,
                           std::span<const double> targets);

struct SensitivityMatrix {
    std::vector<std::vector<double>> values;  // panel row x surface point
    std::vector<bool> undefined;              // points with zero mean |gradient|
};

// | |dy/dv_i| / mean_panel(|dy/dv_i|) - 1 | for the surface-vol features
// listed in `volFeatures`.
SensitivityMatrix sensitivity(const Surrogate& model, const std::vector<std::vector<double>>& panel,
                              std::span<const std::size_t> volFeatures);

}  // namespace exoval
