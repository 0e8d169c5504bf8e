#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "symgrad/dataset.hpp"
#include "symgrad/types.hpp"

namespace symgrad {

enum class Activation { Elu, Sigmoid, Identity };

[[nodiscard]] double activate(Activation a, double z) noexcept;
[[nodiscard]] double activation_derivative(Activation a, double z) noexcept;
[[nodiscard]] std::string_view activation_name(Activation a) noexcept;
[[nodiscard]] Activation parse_activation(std::string_view name);

[[nodiscard]] inline double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct DenseLayer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;     // out
    Activation activation = Activation::Elu;

    [[nodiscard]] std::size_t inputs() const noexcept { return static_cast<std::size_t>(weights.cols()); }
    [[nodiscard]] std::size_t outputs() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

/// Selects one neuron's pre-activation as the scalar to interpret. The default is the output neuron.
struct NeuronRef {
    std::size_t layer = 0;
    std::size_t index = 0;
};

/// Feedforward binary classifier F(x) = sigmoid(f(x)) where f is the output pre-activation.
class MlpModel {
public:
    struct Output {
        double probability = 0.5;  // F
        double latent = 0.0;       // f
    };

    MlpModel() = default;
    /// Validates chaining dimensions, a width-1 sigmoid output layer, and finite parameters.
    MlpModel(std::size_t input_dim, std::vector<DenseLayer> layers);

    [[nodiscard]] std::size_t input_dim() const noexcept { return input_dim_; }
    [[nodiscard]] const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    [[nodiscard]] NeuronRef output_neuron() const noexcept { return {layers_.size() - 1, 0}; }

    [[nodiscard]] Output forward(std::span<const double> x) const;
    [[nodiscard]] double latent(std::span<const double> x) const { return forward(x).latent; }

    /// Exact gradient of the latent output f by reverse accumulation.
    [[nodiscard]] std::vector<double> input_gradient(std::span<const double> x) const;
    /// Gradient of F = sigmoid(f).
    [[nodiscard]] std::vector<double> probability_gradient(std::span<const double> x) const;

    /// Pre-activation of any neuron and its input gradient.
    [[nodiscard]] double pre_activation(std::span<const double> x, NeuronRef neuron) const;
    [[nodiscard]] std::vector<double> pre_activation_gradient(std::span<const double> x, NeuronRef neuron) const;

    /// Batched forward pass: latent values for every row.
    [[nodiscard]] Vector latent_batch(const Matrix& x) const;
    /// Batched gradients of a neuron's pre-activation, one row per input row.
    [[nodiscard]] Matrix gradient_batch(const Matrix& x, std::optional<NeuronRef> neuron = std::nullopt) const;

    /// Multiplies the latent output by c (final-layer weights and bias scaled).
    [[nodiscard]] MlpModel scaled_latent(double c) const;

    [[nodiscard]] std::size_t parameter_count() const noexcept;

private:
    void check_input(std::span<const double> x) const;

    std::size_t input_dim_ = 0;
    std::vector<DenseLayer> layers_;
};

/// Hidden ELU layers of the given widths followed by one sigmoid output neuron.
/// Weights are uniform in +-sqrt(3 / fan_in); biases start at zero.
[[nodiscard]] MlpModel init_model(std::size_t input_dim, std::span<const std::size_t> hidden, Seed seed);

struct TrainConfig {
    std::vector<std::size_t> hidden{128, 128};
    double l2 = 1e-4;
    double dropout = 0.2;
    std::size_t batch_size = 100;
    std::size_t max_epochs = 1000;
    double learning_rate = 1e-3;
    double decay_factor = 0.5;
    std::size_t decay_patience = 10;
    std::size_t stop_patience = 25;
    double min_delta = 1e-4;  // improvement needed to reset the patience counters
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    Seed seed = 0;

    /// Throws UsageError on out-of-range values.
    void validate() const;

    /// Two hidden layers of 1000 units.
    static TrainConfig full_scale();
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    MlpModel model;  // parameters with the best validation loss
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

/// Adam on binary cross-entropy (from logits) plus l2 * sum of squared hidden-layer
/// parameters, inverted dropout after each hidden layer, learning-rate halving on
/// plateaus and early stopping. Deterministic given cfg.seed.
[[nodiscard]] TrainResult train(const MlpModel& model, const Dataset& train_set, const Dataset& val_set,
                                const TrainConfig& cfg);

struct Evaluation {
    double loss = 0.0;  // mean cross-entropy, without the penalty
    double accuracy = 0.0;
};
[[nodiscard]] Evaluation evaluate(const MlpModel& model, const Dataset& ds);

// Checkpoints: versioned JSON with dimensions, activations and row-major parameters.
[[nodiscard]] std::string serialize_model(const MlpModel& model);
[[nodiscard]] MlpModel deserialize_model(std::string_view text);
void save_model(const MlpModel& model, const std::filesystem::path& path);
[[nodiscard]] MlpModel load_model(const std::filesystem::path& path);
/// SHA-256 of the serialized checkpoint.
[[nodiscard]] std::string model_hash(const MlpModel& model);

void write_history(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace symgrad
