#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "symgrad/dataset.hpp"
#include "symgrad/symsearch.hpp"

namespace symgrad {

/// Labeled points with labels recoded to -1 / +1.
struct HingeDataset {
    Matrix X;
    std::vector<double> y;

    [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
    [[nodiscard]] std::size_t features() const noexcept { return static_cast<std::size_t>(X.cols()); }

    /// Throws UsageError when only one class is present.
    static HingeDataset from_dataset(const Dataset& ds);
};

/// mean(max(0, 1 - y * T(x))) over the rows; kInvalidLoss if T is not finite somewhere.
class HingeObjective final : public Objective {
public:
    explicit HingeObjective(const HingeDataset& data) : data_(&data) {}
    using Objective::loss;

    [[nodiscard]] std::size_t size() const noexcept override { return data_->size(); }
    [[nodiscard]] std::size_t features() const noexcept override { return data_->features(); }
    [[nodiscard]] double loss(const ExprTree& tree, std::span<const std::size_t> rows,
                              BatchEvaluator& scratch) const override;
    [[nodiscard]] std::string name() const override { return "hinge"; }

private:
    const HingeDataset* data_;
};

[[nodiscard]] double hinge_loss(const ExprTree& tree, const HingeDataset& data, std::span<const std::size_t> rows);

/// Symbolic classification with the gradient search machinery; constants are optimized
/// every generation.
[[nodiscard]] SearchResult search_classifier(const HingeDataset& data, SearchConfig cfg,
                                             const ProgressCallback& progress = {});

/// Front CSV plus a sidecar tagged objective=hinge.
void write_classifier_front(const ParetoFront& front, const std::filesystem::path& csv_path,
                            std::map<std::string, std::string> metadata);

}  // namespace symgrad
