#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "symgrad/exprtree.hpp"
#include "symgrad/gradients.hpp"
#include "symgrad/types.hpp"

namespace symgrad {

inline constexpr double kInvalidLoss = std::numeric_limits<double>::infinity();

/// Loss landscape the search minimizes: a loss of a tree over a subset of data rows.
class Objective {
public:
    virtual ~Objective() = default;
    [[nodiscard]] virtual std::size_t size() const noexcept = 0;
    [[nodiscard]] virtual std::size_t features() const noexcept = 0;
    /// Loss on the given rows; kInvalidLoss when the tree is not finite on any of them.
    [[nodiscard]] virtual double loss(const ExprTree& tree, std::span<const std::size_t> rows,
                                      BatchEvaluator& scratch) const = 0;
    [[nodiscard]] virtual std::string name() const = 0;

    [[nodiscard]] double loss(const ExprTree& tree, std::span<const std::size_t> rows) const {
        BatchEvaluator scratch;
        return loss(tree, rows, scratch);
    }
    [[nodiscard]] double full_loss(const ExprTree& tree, BatchEvaluator& scratch) const;
};

/// Mean squared distance between the target unit gradients and the tree's normalized
/// gradients (exactly-zero tree gradients stay zero). Equals 2 - 2*cosine for unit rows.
class GradientObjective final : public Objective {
public:
    explicit GradientObjective(const GradientSet& gs, bool sign_insensitive = false)
        : gs_(&gs), sign_insensitive_(sign_insensitive) {}
    using Objective::loss;

    [[nodiscard]] std::size_t size() const noexcept override { return gs_->size(); }
    [[nodiscard]] std::size_t features() const noexcept override { return gs_->features(); }
    [[nodiscard]] double loss(const ExprTree& tree, std::span<const std::size_t> rows,
                              BatchEvaluator& scratch) const override;
    [[nodiscard]] std::string name() const override { return sign_insensitive_ ? "gradient-abs" : "gradient"; }

private:
    const GradientSet* gs_;
    bool sign_insensitive_;
};

/// Unit-length copy of `g` computed without overflow; exactly-zero input stays zero.
void normalize_vector(std::span<const double> g, std::span<double> out);

/// Normalized-gradient MSE of `tree` against `gs` on the given rows.
[[nodiscard]] double fitness(const ExprTree& tree, const GradientSet& gs, std::span<const std::size_t> batch);

struct SearchConfig {
    std::size_t populations = 8;
    std::size_t population_size = 50;
    std::size_t iterations = 200;
    std::size_t batch_size = 25;
    std::size_t max_size = 30;
    std::size_t init_max_size = 7;
    double mutation_probability = 0.7;
    double crossover_probability = 0.3;
    std::size_t tournament_size = 5;
    double parsimony = 1e-3;  // selection score = loss + parsimony * complexity

    std::size_t migration_interval = 10;  // iterations
    std::size_t migration_count = 2;      // ring topology, best replace worst
    std::size_t front_migrants = 2;       // front entries copied into each population at migration

    std::size_t optimize_interval = 5;         // generations between constant-optimization passes
    std::size_t optimizer_evaluations = 100;   // objective evaluations per simplex run
    double optimize_probability = 0.1;         // fraction of members optimized per pass
    std::size_t optimizer_sample = 200;        // rows used when optimizing front members

    std::size_t early_stop_patience = 0;  // iterations without front improvement; 0 disables
    std::size_t threads = 1;
    bool sign_insensitive = false;
    Seed seed = 0;
    OperatorSet operators;

    void validate() const;
    /// Full-scale symbolic-search hyperparameters are the defaults.
    static SearchConfig defaults() { return {}; }
};

struct FrontEntry {
    std::size_t complexity = 0;
    double loss = 0.0;
    ExprTree expression;
};

/// Non-dominated (complexity, loss) set: strictly increasing complexity, strictly decreasing loss.
class ParetoFront {
public:
    /// Inserts the candidate unless an entry of equal or lower complexity has equal or lower
    /// loss (equal meaning within a relative 1e-9); removes entries it dominates. Returns
    /// true if inserted.
    bool offer(FrontEntry entry);

    [[nodiscard]] std::span<const FrontEntry> entries() const noexcept { return entries_; }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] const FrontEntry& operator[](std::size_t i) const { return entries_[i]; }
    /// Checks the ordering invariant.
    [[nodiscard]] bool well_formed() const noexcept;

private:
    std::vector<FrontEntry> entries_;
};

struct KneeResult {
    std::size_t index = 0;
    bool degenerate = false;  // front had a single entry
};

/// Entry after the largest drop of log10(loss) per unit of complexity; ties go to the
/// lower complexity and a front without any drop yields its first entry.
[[nodiscard]] KneeResult knee(std::span<const FrontEntry> front);

struct OptimizerSettings {
    std::size_t max_evaluations = 100;
    double initial_step = 0.1;  // relative to max(|c|, 1)
};

/// Nelder-Mead over the tree's constants on the given rows. The result never has a higher
/// loss than the input on those rows; constant-free trees come back unchanged.
[[nodiscard]] ExprTree optimize_constants(const ExprTree& tree, const Objective& objective,
                                          std::span<const std::size_t> rows, const OptimizerSettings& settings,
                                          std::size_t* evaluations = nullptr);

[[nodiscard]] ExprTree optimize_constants(const ExprTree& tree, const GradientSet& gs,
                                          std::span<const std::size_t> batch, const OptimizerSettings& settings);

struct Individual {
    ExprTree tree;
    double loss = kInvalidLoss;  // on the population's current batch
    std::uint64_t birth = 0;
};

struct EvolveStats {
    std::size_t candidate_evaluations = 0;  // member re-evaluations plus offspring
    std::size_t optimizer_evaluations = 0;
    std::size_t rejected_oversize = 0;
};

/// One island of the multi-population search.
struct Population {
    std::vector<Individual> members;
    std::mt19937_64 rng;
    std::uint64_t clock = 0;
    std::vector<std::size_t> batch;
    /// Lowest-batch-loss tree seen per complexity since the last harvest.
    std::map<std::size_t, Individual> best_seen;

    static Population random(const Objective& objective, const SearchConfig& cfg, Seed seed);
};

/// One generation: a fresh batch, re-evaluation of all members, then population_size
/// regularized-evolution steps (tournament parent, mutation or crossover, child replaces the
/// oldest member). Oversized offspring are rejected. Every optimize_interval generations
/// members are simplified and a fraction get their constants optimized.
void evolve(Population& pop, const Objective& objective, const SearchConfig& cfg, std::size_t generation,
            EvolveStats* stats = nullptr);

struct IterationLog {
    std::size_t iteration = 0;
    std::size_t front_size = 0;
    double best_loss = 0.0;
    std::size_t candidate_evaluations = 0;
    std::size_t optimizer_evaluations = 0;
};

struct SearchResult {
    ParetoFront front;  // losses on the full data set
    std::vector<IterationLog> log;
    bool early_stopped = false;
};

using ProgressCallback = std::function<void(const IterationLog&)>;

/// Multi-population search minimizing `objective`; deterministic given cfg.seed regardless
/// of cfg.threads.
[[nodiscard]] SearchResult run_search(const Objective& objective, const SearchConfig& cfg,
                                      const ProgressCallback& progress = {});

/// Gradient-matching search on a gradient set.
[[nodiscard]] SearchResult search(const GradientSet& gs, const SearchConfig& cfg,
                                  const ProgressCallback& progress = {});

// Front persistence: CSV complexity,loss,expression (full-precision infix) plus a sidecar.
void write_front(const ParetoFront& front, const std::filesystem::path& csv_path,
                 const std::map<std::string, std::string>& metadata);
[[nodiscard]] std::vector<FrontEntry> read_front(const std::filesystem::path& csv_path);
void write_search_log(const std::vector<IterationLog>& log, const std::filesystem::path& path);

}  // namespace symgrad
