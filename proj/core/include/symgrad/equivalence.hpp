#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "symgrad/exprtree.hpp"
#include "symgrad/neuralnet.hpp"
#include "symgrad/types.hpp"

namespace symgrad {

/// Differentiable scalar function of a point.
class ScalarField {
public:
    virtual ~ScalarField() = default;
    [[nodiscard]] virtual std::size_t dims() const noexcept = 0;
    [[nodiscard]] virtual double value(std::span<const double> x) const = 0;
    virtual void gradient(std::span<const double> x, std::span<double> out) const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

class TreeField final : public ScalarField {
public:
    /// `dims` defaults to the tree's required arity.
    explicit TreeField(ExprTree tree, std::size_t dims = 0);
    [[nodiscard]] std::size_t dims() const noexcept override { return dims_; }
    [[nodiscard]] double value(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> out) const override;
    [[nodiscard]] std::string name() const override;
    [[nodiscard]] const ExprTree& tree() const noexcept { return tree_; }

private:
    ExprTree tree_;
    std::size_t dims_;
};

/// The network's latent output f, or a chosen neuron's pre-activation.
class ModelField final : public ScalarField {
public:
    explicit ModelField(const MlpModel& model, std::optional<NeuronRef> neuron = std::nullopt)
        : model_(&model), neuron_(neuron.value_or(model.output_neuron())) {}
    [[nodiscard]] std::size_t dims() const noexcept override { return model_->input_dim(); }
    [[nodiscard]] double value(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> out) const override;
    [[nodiscard]] std::string name() const override { return "model"; }

private:
    const MlpModel* model_;
    NeuronRef neuron_;
};

/// phi(inner(x)) with phi given with its derivative.
class ComposedField final : public ScalarField {
public:
    ComposedField(std::shared_ptr<const ScalarField> inner, std::function<double(double)> phi,
                  std::function<double(double)> dphi, std::string label);
    [[nodiscard]] std::size_t dims() const noexcept override { return inner_->dims(); }
    [[nodiscard]] double value(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> out) const override;
    [[nodiscard]] std::string name() const override { return label_; }

private:
    std::shared_ptr<const ScalarField> inner_;
    std::function<double(double)> phi_;
    std::function<double(double)> dphi_;
    std::string label_;
};

struct AlignmentReport {
    std::vector<double> cosines;  // per probe
    double mean = 0.0;
    double min = 0.0;
    double fraction_above = 0.0;  // share of probes with cosine > threshold
    double threshold = 0.0;
};

/// Cosine between the gradients of `a` and `b` at each probe (rows). Two zero gradients
/// count as aligned, one zero gradient as orthogonal. Throws NumericError naming the
/// probes where a gradient is not finite.
[[nodiscard]] AlignmentReport gradient_alignment(const ScalarField& a, const ScalarField& b, const Matrix& probes,
                                                 double threshold = 0.99);

enum class LinkDirection { Increasing, Decreasing, Undetermined };

[[nodiscard]] std::string_view direction_name(LinkDirection d) noexcept;

struct LinkReport {
    std::vector<std::pair<double, double>> pairs;  // (g, f) sorted by g
    double spearman = 0.0;
    std::size_t inversions = 0;  // adjacent pairs against the dominant direction
    LinkDirection direction = LinkDirection::Undetermined;
};

/// Spearman rank correlation with average ranks for ties.
[[nodiscard]] double spearman(std::span<const double> a, std::span<const double> b);

/// Empirical check that f = phi(g) for a monotone phi. Needs at least 10 probes; throws
/// DegenerateInputError when g is constant on them. |rho| >= 0.9 sets the direction.
[[nodiscard]] LinkReport link_report(const ScalarField& f, const ScalarField& g, const Matrix& probes);

/// CSV g,f plus a summary sidecar (.meta).
void write_link_report(const LinkReport& report, const std::filesystem::path& csv_path);
[[nodiscard]] std::string summarize(const LinkReport& report);
[[nodiscard]] std::string summarize(const AlignmentReport& report);

}  // namespace symgrad
