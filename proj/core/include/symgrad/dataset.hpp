#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "symgrad/exprtree.hpp"
#include "symgrad/types.hpp"

namespace symgrad {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Axis-aligned sampling box, one closed interval per input variable.
struct SamplingDomain {
    std::vector<Interval> box;

    [[nodiscard]] std::size_t dims() const noexcept { return box.size(); }
    /// Throws UsageError unless every interval has lo < hi.
    void validate() const;
    /// "lo:hi,lo:hi,..." with shortest round-trip numbers.
    [[nodiscard]] std::string to_string() const;
    static SamplingDomain parse(std::string_view text);
};

/// Closed-form decision function g with its class threshold: label 1 iff g(x) > threshold.
struct DecisionFormula {
    int id = 0;
    std::size_t arity = 0;
    double threshold = 0.0;
    ExprTree form;
};

inline constexpr int kExperimentCount = 7;

/// Decision formula for experiments 1..7. Experiment 7 labels by the conjunction
/// rule; its formula x1*x2 + x3*x4 > 2 agrees with that rule on every kept point.
[[nodiscard]] DecisionFormula decision_formula(int experiment);

/// Default sampling box for experiments 1..7.
[[nodiscard]] SamplingDomain default_domain(int experiment);

/// g(x); throws UsageError on dimension mismatch and DomainError on a non-finite value.
[[nodiscard]] double eval_decision(const DecisionFormula& formula, std::span<const double> x);

struct DatasetMeta {
    int experiment = 0;
    Seed seed = 0;
    double noise = 0.0;
    std::size_t n = 0;
    SamplingDomain domain;
};

struct Dataset {
    Matrix X;
    std::vector<int> y;
    DatasetMeta meta;

    [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
    [[nodiscard]] std::size_t features() const noexcept { return static_cast<std::size_t>(X.cols()); }
    /// Throws DataError if entries are non-finite, a class is missing or sizes disagree.
    void validate() const;
};

struct GenerationOptions {
    int experiment = 1;
    std::size_t n = 10000;
    Seed seed = 0;
    double noise = 0.01;
    std::optional<SamplingDomain> domain;  // defaults to default_domain(experiment)
};

/// Uniform sampling in the domain, labels from clean coordinates, then multiplicative
/// Gaussian noise x_i * (1 + eps), eps ~ N(0, noise^2). Deterministic given the seed.
[[nodiscard]] Dataset generate_experiment(const GenerationOptions& options);

/// Shuffled disjoint partition into (train, validation).
[[nodiscard]] std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, Seed seed);

/// Rows of `ds` selected by index, keeping metadata except the count.
[[nodiscard]] Dataset take_rows(const Dataset& ds, std::span<const std::size_t> rows);

// Persistence: CSV with header x1..xn,label plus a key=value sidecar.
void write_dataset(const Dataset& ds, const std::filesystem::path& csv_path);
[[nodiscard]] Dataset read_dataset(const std::filesystem::path& csv_path);
[[nodiscard]] std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace symgrad
