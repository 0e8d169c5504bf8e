#include "symgrad/symclass.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "symgrad/errors.hpp"

namespace symgrad {

HingeDataset HingeDataset::from_dataset(const Dataset& ds) {
    HingeDataset out;
    out.X = ds.X;
    out.y.reserve(ds.size());
    std::size_t positives = 0;
    for (int label : ds.y) {
        if (label != 0 && label != 1) throw DataError(fmt::format("label {} is not 0 or 1", label));
        positives += static_cast<std::size_t>(label);
        out.y.push_back(label == 1 ? 1.0 : -1.0);
    }
    if (positives == 0 || positives == ds.size()) {
        throw UsageError("symbolic classification needs both classes in the data");
    }
    return out;
}

double HingeObjective::loss(const ExprTree& tree, std::span<const std::size_t> rows, BatchEvaluator& scratch) const {
    if (rows.empty()) return kInvalidLoss;
    scratch.evaluate(tree, data_->X, rows);
    const auto values = scratch.values();
    const auto valid = scratch.valid();
    double total = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (!valid[k]) return kInvalidLoss;
        total += std::max(0.0, 1.0 - data_->y[rows[k]] * values[k]);
    }
    return total / static_cast<double>(rows.size());
}

double hinge_loss(const ExprTree& tree, const HingeDataset& data, std::span<const std::size_t> rows) {
    if (tree.required_arity() > data.features()) {
        throw UsageError(fmt::format("tree uses {} variables, data has {}", tree.required_arity(), data.features()));
    }
    return HingeObjective(data).loss(tree, rows);
}

SearchResult search_classifier(const HingeDataset& data, SearchConfig cfg, const ProgressCallback& progress) {
    if (data.size() == 0) throw UsageError("classification data is empty");
    const auto positives = std::count(data.y.begin(), data.y.end(), 1.0);
    if (positives == 0 || static_cast<std::size_t>(positives) == data.size()) {
        throw UsageError("symbolic classification needs both classes in the data");
    }
    cfg.optimize_interval = 1;
    return run_search(HingeObjective(data), cfg, progress);
}

void write_classifier_front(const ParetoFront& front, const std::filesystem::path& csv_path,
                            std::map<std::string, std::string> metadata) {
    metadata["objective"] = "hinge";
    write_front(front, csv_path, metadata);
}

}  // namespace symgrad
