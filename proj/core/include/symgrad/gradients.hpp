#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "symgrad/dataset.hpp"
#include "symgrad/neuralnet.hpp"
#include "symgrad/types.hpp"

namespace symgrad {

/// Optional unlabeled points added before filtering: Gaussian jitter copies of training rows.
struct PerturbAugment {
    double scale = 0.01;     // jitter std relative to each feature's std
    std::size_t count = 1;   // copies per training row
};

struct ExtractionConfig {
    double delta = 1e-4;
    std::optional<PerturbAugment> augment;  // none by default
    Seed seed = 0;
    std::optional<NeuronRef> neuron;  // interpret a hidden neuron instead of the output

    void validate() const;
};

struct GradientProvenance {
    std::string model_hash;
    double delta = 0.0;
    DatasetMeta source;
    std::size_t candidates = 0;  // rows considered before filtering
};

/// Training data for the symbolic search: points and unit (or exactly zero) gradient rows.
struct GradientSet {
    Matrix X;
    Matrix G;
    GradientProvenance provenance;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(X.rows()); }
    [[nodiscard]] std::size_t features() const noexcept { return static_cast<std::size_t>(X.cols()); }
};

/// Indices of rows with F(x) in [delta, 1 - delta], in input order.
[[nodiscard]] std::vector<std::size_t> confident_rows(const MlpModel& model, const Matrix& x, double delta);

/// Rows of `x` with F(x) in [delta, 1 - delta]; ExtractionError when none remain.
[[nodiscard]] Matrix filter_confident(const MlpModel& model, const Matrix& x, double delta);

/// Scales every nonzero row to unit length; exactly-zero rows stay zero.
void normalize_rows(Matrix& g);

/// Augments, filters, and computes the normalized latent gradients.
[[nodiscard]] GradientSet extract(const MlpModel& model, const Dataset& ds, const ExtractionConfig& cfg);

// CSV x1..xn,g1..gn plus a key=value sidecar (delta, model hash, counts, source metadata).
void write_gradient_set(const GradientSet& gs, const std::filesystem::path& csv_path);
[[nodiscard]] GradientSet read_gradient_set(const std::filesystem::path& csv_path);

}  // namespace symgrad
