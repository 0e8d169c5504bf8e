#include "symgrad/symsearch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "symgrad/errors.hpp"
#include "symgrad/textio.hpp"

namespace symgrad {

double Objective::full_loss(const ExprTree& tree, BatchEvaluator& scratch) const {
    std::vector<std::size_t> rows(size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return loss(tree, rows, scratch);
}

void normalize_vector(std::span<const double> g, std::span<double> out) {
    double scale = 0.0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    double norm = 0.0;
    for (double v : g) norm += (v / scale) * (v / scale);
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < g.size(); ++j) out[j] = (g[j] / scale) / norm;
}

double GradientObjective::loss(const ExprTree& tree, std::span<const std::size_t> rows,
                               BatchEvaluator& scratch) const {
    if (rows.empty()) return kInvalidLoss;
    scratch.evaluate_with_gradient(tree, gs_->X, rows);
    const auto valid = scratch.valid();
    const std::size_t d = gs_->features();
    double normalized[16];
    std::vector<double> wide;
    std::span<double> gt(normalized, std::min<std::size_t>(d, 16));
    if (d > 16) {
        wide.resize(d);
        gt = wide;
    }
    double squared = 0.0;  // sum of squared distances
    double target_norms = 0.0;
    double tree_norms = 0.0;
    double dots = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (!valid[k]) return kInvalidLoss;
        normalize_vector(scratch.gradient(k), gt);
        const auto r = static_cast<Eigen::Index>(rows[k]);
        for (std::size_t j = 0; j < d; ++j) {
            const double gf = gs_->G(r, static_cast<Eigen::Index>(j));
            const double diff = gf - gt[j];
            squared += diff * diff;
            target_norms += gf * gf;
            tree_norms += gt[j] * gt[j];
            dots += gf * gt[j];
        }
    }
    const double n = static_cast<double>(rows.size());
    if (sign_insensitive_) return (target_norms + tree_norms) / n - 2.0 * std::abs(dots) / n;
    return squared / n;
}

double fitness(const ExprTree& tree, const GradientSet& gs, std::span<const std::size_t> batch) {
    if (tree.required_arity() > gs.features()) {
        throw UsageError(fmt::format("tree uses {} variables, gradient set has {}", tree.required_arity(), gs.features()));
    }
    return GradientObjective(gs).loss(tree, batch);
}

void SearchConfig::validate() const {
    if (populations == 0 || population_size == 0) throw UsageError("need at least one population with one member");
    if (batch_size == 0) throw UsageError("batch size must be at least 1");
    if (max_size == 0) throw UsageError("max tree size must be at least 1");
    if (max_size > 60000) throw UsageError("max tree size too large");
    auto prob = [](double p, const char* what) {
        if (!(p >= 0.0 && p <= 1.0)) throw UsageError(fmt::format("{} {} outside [0, 1]", what, p));
    };
    prob(mutation_probability, "mutation probability");
    prob(crossover_probability, "crossover probability");
    prob(optimize_probability, "optimize probability");
    if (mutation_probability + crossover_probability > 1.0 + 1e-12) {
        throw UsageError("mutation and crossover probabilities sum to more than 1");
    }
    if (tournament_size == 0) throw UsageError("tournament size must be at least 1");
    if (!(parsimony >= 0.0)) throw UsageError("parsimony must be non-negative");
    if (threads == 0) throw UsageError("threads must be at least 1");
    if (operators.unary().empty() && operators.binary().empty()) throw UsageError("operator set is empty");
}

// ---------------------------------------------------------------------------
// Pareto front

namespace {

// Losses closer than this relative margin count as equal, so rescaled copies of an entry
// (identical loss up to rounding) never displace or follow it.
constexpr double kLossTieTolerance = 1e-9;

bool improves(double candidate, double incumbent) { return candidate < incumbent * (1.0 - kLossTieTolerance); }

}  // namespace

bool ParetoFront::offer(FrontEntry entry) {
    if (!std::isfinite(entry.loss)) return false;
    for (const auto& e : entries_) {
        if (e.complexity <= entry.complexity && !improves(entry.loss, e.loss)) return false;
    }
    std::erase_if(entries_, [&](const FrontEntry& e) {
        return e.complexity >= entry.complexity && !improves(e.loss, entry.loss);
    });
    auto pos = std::lower_bound(entries_.begin(), entries_.end(), entry.complexity,
                                [](const FrontEntry& e, std::size_t c) { return e.complexity < c; });
    entries_.insert(pos, std::move(entry));
    return true;
}

bool ParetoFront::well_formed() const noexcept {
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        if (!(entries_[i].complexity > entries_[i - 1].complexity)) return false;
        if (!(entries_[i].loss < entries_[i - 1].loss)) return false;
    }
    return true;
}

KneeResult knee(std::span<const FrontEntry> front) {
    if (front.empty()) throw UsageError("knee of an empty front");
    if (front.size() == 1) return {0, true};
    constexpr double floor = 1e-300;
    std::size_t best = 0;
    double best_drop = 0.0;
    for (std::size_t i = 1; i < front.size(); ++i) {
        const double dc = static_cast<double>(front[i].complexity) - static_cast<double>(front[i - 1].complexity);
        const double drop = (std::log10(std::max(front[i - 1].loss, floor)) - std::log10(std::max(front[i].loss, floor))) /
                            std::max(dc, 1.0);
        if (drop > best_drop) {
            best_drop = drop;
            best = i;
        }
    }
    return {best, false};
}

// ---------------------------------------------------------------------------
// Constant optimization

namespace {

struct GslVectorDeleter {
    void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct GslMinimizerDeleter {
    void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

struct SimplexContext {
    const ExprTree* tree;
    const Objective* objective;
    std::span<const std::size_t> rows;
    BatchEvaluator scratch;
    std::vector<double> values;
    std::size_t evaluations = 0;
    std::size_t budget = 0;
    std::vector<double> best_values;
    double best_loss = kInvalidLoss;
};

constexpr double kPenalty = 1e100;

double simplex_target(const gsl_vector* x, void* params) {
    auto& ctx = *static_cast<SimplexContext*>(params);
    if (ctx.evaluations >= ctx.budget) return kPenalty;
    ++ctx.evaluations;
    for (std::size_t i = 0; i < ctx.values.size(); ++i) ctx.values[i] = gsl_vector_get(x, i);
    const double l = ctx.objective->loss(ctx.tree->with_constants(ctx.values), ctx.rows, ctx.scratch);
    if (l < ctx.best_loss) {
        ctx.best_loss = l;
        ctx.best_values = ctx.values;
    }
    return std::isfinite(l) ? l : kPenalty;
}

}  // namespace

ExprTree optimize_constants(const ExprTree& tree, const Objective& objective, std::span<const std::size_t> rows,
                            const OptimizerSettings& settings, std::size_t* evaluations) {
    const std::size_t n = tree.constant_count();
    if (n == 0 || settings.max_evaluations == 0 || rows.empty()) return tree;
    gsl_set_error_handler_off();

    SimplexContext ctx{&tree, &objective, rows, {}, tree.constants(), 0, settings.max_evaluations, {}, kInvalidLoss};
    const std::vector<double> start = ctx.values;
    const double start_loss = objective.loss(tree, rows, ctx.scratch);
    ++ctx.evaluations;
    ctx.best_loss = start_loss;
    ctx.best_values = start;

    std::unique_ptr<gsl_vector, GslVectorDeleter> x(gsl_vector_alloc(n));
    std::unique_ptr<gsl_vector, GslVectorDeleter> step(gsl_vector_alloc(n));
    for (std::size_t i = 0; i < n; ++i) {
        gsl_vector_set(x.get(), i, start[i]);
        gsl_vector_set(step.get(), i, settings.initial_step * std::max(std::abs(start[i]), 1.0));
    }
    std::unique_ptr<gsl_multimin_fminimizer, GslMinimizerDeleter> minimizer(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n));
    gsl_multimin_function fn{&simplex_target, n, &ctx};
    if (gsl_multimin_fminimizer_set(minimizer.get(), &fn, x.get(), step.get()) == GSL_SUCCESS) {
        while (ctx.evaluations < ctx.budget) {
            if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) break;
            if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(minimizer.get()), 1e-12) == GSL_SUCCESS) break;
        }
    }
    if (evaluations) *evaluations += ctx.evaluations;
    if (!(ctx.best_loss < start_loss) && std::isfinite(start_loss)) return tree;
    if (!std::isfinite(ctx.best_loss)) return tree;
    return tree.with_constants(ctx.best_values);
}

ExprTree optimize_constants(const ExprTree& tree, const GradientSet& gs, std::span<const std::size_t> batch,
                            const OptimizerSettings& settings) {
    return optimize_constants(tree, GradientObjective(gs), batch, settings);
}

// ---------------------------------------------------------------------------
// Variation operators

namespace {

double score(const Individual& ind, const SearchConfig& cfg) {
    return ind.loss + cfg.parsimony * static_cast<double>(ind.tree.complexity());
}

std::size_t tournament(const Population& pop, const SearchConfig& cfg, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, pop.members.size() - 1);
    std::size_t best = pick(rng);
    for (std::size_t k = 1; k < cfg.tournament_size; ++k) {
        const std::size_t c = pick(rng);
        if (score(pop.members[c], cfg) < score(pop.members[best], cfg)) best = c;
    }
    return best;
}

ExprTree random_leaf(std::mt19937_64& rng, std::size_t arity) {
    return random_tree(rng, arity, 1, OperatorSet{}, 0.3);
}

std::size_t random_node(const ExprTree& t, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, t.complexity() - 1);
    return pick(rng);
}

enum class Mutation { PerturbConstant, PointReplace, Insert, Delete, Replace };

ExprTree mutate(const ExprTree& t, std::size_t arity, const OperatorSet& ops, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const bool has_constants = t.constant_count() > 0;

    struct Weighted {
        Mutation kind;
        double weight;
    };
    const Weighted table[] = {
        {Mutation::PerturbConstant, has_constants ? 0.3 : 0.0},
        {Mutation::PointReplace, 0.2},
        {Mutation::Insert, 0.2},
        {Mutation::Delete, t.complexity() > 1 ? 0.15 : 0.0},
        {Mutation::Replace, 0.15},
    };
    double total = 0.0;
    for (const auto& w : table) total += w.weight;
    double r = unit(rng) * total;
    Mutation kind = Mutation::Replace;
    for (const auto& w : table) {
        if (r < w.weight) {
            kind = w.kind;
            break;
        }
        r -= w.weight;
    }

    std::vector<Node> nodes(t.nodes().begin(), t.nodes().end());
    switch (kind) {
    case Mutation::PerturbConstant: {
        std::vector<std::size_t> consts;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].op == Op::Const) consts.push_back(i);
        std::uniform_int_distribution<std::size_t> pick(0, consts.size() - 1);
        Node& c = nodes[consts[pick(rng)]];
        if (unit(rng) < 0.1) c.value = -c.value;
        else c.value = c.value * (1.0 + 0.3 * normal(rng)) + 0.1 * normal(rng);
        return ExprTree::from_prefix(std::move(nodes));
    }
    case Mutation::PointReplace: {
        const std::size_t i = random_node(t, rng);
        Node& n = nodes[i];
        const int a = arity_of(n.op);
        if (a == 0) {
            return t.replace_subtree(i, random_leaf(rng, arity));
        }
        const auto choices = a == 1 ? ops.unary() : ops.binary();
        if (choices.empty()) return t;
        std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
        n.op = choices[pick(rng)];
        return ExprTree::from_prefix(std::move(nodes));
    }
    case Mutation::Insert: {
        const std::size_t i = random_node(t, rng);
        const ExprTree sub = t.subtree(i);
        const auto unary = ops.unary();
        const auto binary = ops.binary();
        const bool use_unary = !unary.empty() && (binary.empty() || unit(rng) < 0.3);
        if (use_unary) {
            std::uniform_int_distribution<std::size_t> pick(0, unary.size() - 1);
            return t.replace_subtree(i, ExprTree::unary(unary[pick(rng)], sub));
        }
        if (binary.empty()) return t;
        std::uniform_int_distribution<std::size_t> pick(0, binary.size() - 1);
        const Op op = binary[pick(rng)];
        const ExprTree leaf = random_leaf(rng, arity);
        return t.replace_subtree(i, unit(rng) < 0.5 ? ExprTree::binary(op, sub, leaf) : ExprTree::binary(op, leaf, sub));
    }
    case Mutation::Delete: {
        std::vector<std::size_t> internal;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (arity_of(nodes[i].op) > 0) internal.push_back(i);
        if (internal.empty()) return t;
        std::uniform_int_distribution<std::size_t> pick(0, internal.size() - 1);
        const std::size_t i = internal[pick(rng)];
        if (unit(rng) < 0.5) return t.replace_subtree(i, random_leaf(rng, arity));
        // Hoist one child into the deleted node's place.
        const bool second = arity_of(nodes[i].op) == 2 && unit(rng) < 0.5;
        return t.replace_subtree(i, t.subtree(second ? t.second_child(i) : t.first_child(i)));
    }
    case Mutation::Replace: {
        const std::size_t i = random_node(t, rng);
        std::uniform_int_distribution<std::size_t> size(1, 5);
        return t.replace_subtree(i, random_tree(rng, arity, size(rng), ops));
    }
    }
    return t;
}

ExprTree crossover(const ExprTree& a, const ExprTree& b, std::mt19937_64& rng) {
    const std::size_t i = random_node(a, rng);
    const std::size_t j = random_node(b, rng);
    return a.replace_subtree(i, b.subtree(j));
}

void draw_batch(Population& pop, std::size_t data_size, std::size_t batch_size) {
    if (data_size <= batch_size) {
        pop.batch.resize(data_size);
        std::iota(pop.batch.begin(), pop.batch.end(), std::size_t{0});
        return;
    }
    std::uniform_int_distribution<std::size_t> pick(0, data_size - 1);
    pop.batch.resize(batch_size);
    for (auto& r : pop.batch) r = pick(pop.rng);
}

void record_seen(Population& pop, const Individual& ind) {
    if (!std::isfinite(ind.loss)) return;
    auto [it, inserted] = pop.best_seen.try_emplace(ind.tree.complexity(), ind);
    if (!inserted && ind.loss < it->second.loss) it->second = ind;
}

std::mt19937_64 derive_rng(Seed seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
    return std::mt19937_64(seq);
}

}  // namespace

Population Population::random(const Objective& objective, const SearchConfig& cfg, Seed seed) {
    Population pop;
    pop.rng = std::mt19937_64(seed);
    const std::size_t upper = std::max<std::size_t>(1, std::min(cfg.init_max_size, cfg.max_size));
    std::uniform_int_distribution<std::size_t> size(1, upper);
    pop.members.reserve(cfg.population_size);
    for (std::size_t k = 0; k < cfg.population_size; ++k) {
        ExprTree t = random_tree(pop.rng, objective.features(), size(pop.rng), cfg.operators);
        if (t.complexity() > cfg.max_size) t = random_leaf(pop.rng, objective.features());
        pop.members.push_back({std::move(t), kInvalidLoss, pop.clock++});
    }
    return pop;
}

void evolve(Population& pop, const Objective& objective, const SearchConfig& cfg, std::size_t generation,
            EvolveStats* stats) {
    if (pop.members.empty()) throw UsageError("population is empty");
    EvolveStats local;
    BatchEvaluator scratch;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t arity = objective.features();

    draw_batch(pop, objective.size(), cfg.batch_size);
    for (auto& m : pop.members) {
        m.loss = objective.loss(m.tree, pop.batch, scratch);
        ++local.candidate_evaluations;
        record_seen(pop, m);
    }

    const bool varies = cfg.mutation_probability + cfg.crossover_probability > 0.0;
    for (std::size_t step = 0; varies && step < cfg.population_size; ++step) {
        const double r = unit(pop.rng);
        const bool cross = r < cfg.crossover_probability;
        const bool mut = !cross && r < cfg.crossover_probability + cfg.mutation_probability;
        if (!cross && !mut) continue;

        const std::size_t parent = tournament(pop, cfg, pop.rng);
        ExprTree child;
        bool accepted = false;
        for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
            if (cross) {
                const std::size_t other = tournament(pop, cfg, pop.rng);
                child = crossover(pop.members[parent].tree, pop.members[other].tree, pop.rng);
            } else {
                child = mutate(pop.members[parent].tree, arity, cfg.operators, pop.rng);
            }
            accepted = child.complexity() <= cfg.max_size;
            if (!accepted) ++local.rejected_oversize;
        }
        if (!accepted) child = pop.members[parent].tree;

        Individual offspring{std::move(child), 0.0, pop.clock++};
        offspring.loss = objective.loss(offspring.tree, pop.batch, scratch);
        ++local.candidate_evaluations;
        record_seen(pop, offspring);

        auto oldest = std::min_element(pop.members.begin(), pop.members.end(),
                                       [](const Individual& a, const Individual& b) { return a.birth < b.birth; });
        *oldest = std::move(offspring);
    }

    if (cfg.optimize_interval > 0 && generation % cfg.optimize_interval == 0) {
        const OptimizerSettings settings{cfg.optimizer_evaluations, 0.1};
        for (auto& m : pop.members) {
            ExprTree simplified = simplify(m.tree);
            if (!(simplified == m.tree)) {
                m.tree = std::move(simplified);
                m.loss = objective.loss(m.tree, pop.batch, scratch);
            }
            if (unit(pop.rng) < cfg.optimize_probability && m.tree.constant_count() > 0) {
                m.tree = optimize_constants(m.tree, objective, pop.batch, settings, &local.optimizer_evaluations);
                m.loss = objective.loss(m.tree, pop.batch, scratch);
            }
            record_seen(pop, m);
        }
    }

    if (stats) {
        stats->candidate_evaluations += local.candidate_evaluations;
        stats->optimizer_evaluations += local.optimizer_evaluations;
        stats->rejected_oversize += local.rejected_oversize;
    }
}

// ---------------------------------------------------------------------------
// Driver

namespace {

class FullLossCache {
public:
    explicit FullLossCache(const Objective& objective) : objective_(objective) {}

    double operator()(const ExprTree& tree) {
        auto key = to_string(tree, Precision::Full);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double l = objective_.full_loss(tree, scratch_);
        cache_.emplace(std::move(key), l);
        return l;
    }

private:
    const Objective& objective_;
    BatchEvaluator scratch_;
    std::unordered_map<std::string, double> cache_;
};

void for_each_population(std::vector<Population>& pops, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || pops.size() <= 1) {
        for (std::size_t p = 0; p < pops.size(); ++p) fn(p);
        return;
    }
    std::vector<std::jthread> workers;
    const std::size_t count = std::min(threads, pops.size());
    for (std::size_t w = 0; w < count; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t p = w; p < pops.size(); p += count) fn(p);
        });
    }
}

void migrate(std::vector<Population>& pops, const ParetoFront& front, const SearchConfig& cfg) {
    const std::size_t P = pops.size();
    if (P > 1 && cfg.migration_count > 0) {
        std::vector<std::vector<Individual>> emigrants(P);
        for (std::size_t p = 0; p < P; ++p) {
            std::vector<std::size_t> order(pops[p].members.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return score(pops[p].members[a], cfg) < score(pops[p].members[b], cfg);
            });
            for (std::size_t k = 0; k < std::min(cfg.migration_count, order.size()); ++k) {
                emigrants[p].push_back(pops[p].members[order[k]]);
            }
        }
        for (std::size_t p = 0; p < P; ++p) {
            auto& dest = pops[(p + 1) % P];
            std::vector<std::size_t> order(dest.members.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return score(dest.members[a], cfg) > score(dest.members[b], cfg);
            });
            for (std::size_t k = 0; k < emigrants[p].size() && k < order.size(); ++k) {
                Individual migrant = emigrants[p][k];
                migrant.birth = dest.clock++;
                dest.members[order[k]] = std::move(migrant);
            }
        }
    }
    if (cfg.front_migrants > 0 && !front.empty()) {
        for (auto& pop : pops) {
            std::uniform_int_distribution<std::size_t> pick_member(0, pop.members.size() - 1);
            std::uniform_int_distribution<std::size_t> pick_entry(0, front.size() - 1);
            for (std::size_t k = 0; k < cfg.front_migrants; ++k) {
                const auto& e = front[pick_entry(pop.rng)];
                pop.members[pick_member(pop.rng)] = {e.expression, e.loss, pop.clock++};
            }
        }
    }
}

}  // namespace

SearchResult run_search(const Objective& objective, const SearchConfig& cfg, const ProgressCallback& progress) {
    cfg.validate();
    if (objective.size() == 0) throw UsageError("cannot search on an empty data set");

    std::vector<Population> pops;
    pops.reserve(cfg.populations);
    for (std::size_t p = 0; p < cfg.populations; ++p) {
        auto rng = derive_rng(cfg.seed, p + 1);
        pops.push_back(Population::random(objective, cfg, rng()));
    }

    // Fixed subsample for optimizing front constants.
    auto master = derive_rng(cfg.seed, 0);
    std::vector<std::size_t> opt_rows(objective.size());
    std::iota(opt_rows.begin(), opt_rows.end(), std::size_t{0});
    if (opt_rows.size() > cfg.optimizer_sample && cfg.optimizer_sample > 0) {
        std::shuffle(opt_rows.begin(), opt_rows.end(), master);
        opt_rows.resize(cfg.optimizer_sample);
        std::sort(opt_rows.begin(), opt_rows.end());
    }

    SearchResult result;
    FullLossCache full_loss(objective);
    std::size_t stale = 0;
    std::vector<EvolveStats> stats(pops.size());

    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        std::fill(stats.begin(), stats.end(), EvolveStats{});
        for_each_population(pops, cfg.threads, [&](std::size_t p) { evolve(pops[p], objective, cfg, it, &stats[p]); });

        bool improved = false;
        for (auto& pop : pops) {
            for (auto& [complexity, ind] : pop.best_seen) {
                improved |= result.front.offer({complexity, full_loss(ind.tree), ind.tree});
            }
            pop.best_seen.clear();
        }

        std::size_t optimizer_evals = 0;
        if (cfg.optimize_interval > 0 && it % cfg.optimize_interval == 0) {
            const OptimizerSettings settings{cfg.optimizer_evaluations, 0.1};
            const std::vector<FrontEntry> members(result.front.entries().begin(), result.front.entries().end());
            for (const auto& e : members) {
                if (e.expression.constant_count() == 0) continue;
                ExprTree tuned = simplify(optimize_constants(e.expression, objective, opt_rows, settings, &optimizer_evals));
                improved |= result.front.offer({tuned.complexity(), full_loss(tuned), tuned});
            }
        }

        if (cfg.migration_interval > 0 && it % cfg.migration_interval == 0) migrate(pops, result.front, cfg);

        IterationLog entry{it, result.front.size(),
                           result.front.empty() ? kInvalidLoss : result.front.entries().back().loss, 0, optimizer_evals};
        for (const auto& s : stats) {
            entry.candidate_evaluations += s.candidate_evaluations;
            entry.optimizer_evaluations += s.optimizer_evaluations;
        }
        result.log.push_back(entry);
        if (progress) progress(entry);

        stale = improved ? 0 : stale + 1;
        if (cfg.early_stop_patience > 0 && stale >= cfg.early_stop_patience) {
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

SearchResult search(const GradientSet& gs, const SearchConfig& cfg, const ProgressCallback& progress) {
    if (gs.size() == 0) throw UsageError("gradient set is empty");
    return run_search(GradientObjective(gs, cfg.sign_insensitive), cfg, progress);
}

// ---------------------------------------------------------------------------
// Persistence

void write_front(const ParetoFront& front, const std::filesystem::path& csv_path,
                 const std::map<std::string, std::string>& metadata) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", csv_path.string()));
    out << "complexity,loss,expression\n";
    for (const auto& e : front.entries()) {
        out << e.complexity << ',' << textio::format_double(e.loss) << ",\"" << to_string(e.expression, Precision::Full)
            << "\"\n";
    }
    if (!out) throw DataError(fmt::format("write failed for {}", csv_path.string()));
    auto meta = metadata;
    meta["entries"] = std::to_string(front.size());
    auto sidecar = csv_path;
    sidecar.replace_extension(".meta");
    textio::write_key_values(sidecar, textio::KeyValues(meta.begin(), meta.end()));
}

std::vector<FrontEntry> read_front(const std::filesystem::path& csv_path) {
    const auto table = textio::read_csv(csv_path);
    if (table.header != std::vector<std::string>{"complexity", "loss", "expression"}) {
        throw DataError(fmt::format("{}: expected header complexity,loss,expression", csv_path.string()));
    }
    std::vector<FrontEntry> entries;
    for (const auto& row : table.rows) {
        FrontEntry e;
        e.complexity = std::stoull(row[0]);
        e.loss = textio::parse_double(row[1]);
        try {
            e.expression = parse(row[2]);
        } catch (const ParseError& err) {
            throw DataError(fmt::format("{}: {}", csv_path.string(), err.what()));
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_search_log(const std::vector<IterationLog>& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    for (const auto& l : log) {
        out << fmt::format("iteration={} front_size={} best_loss={:.17g} candidate_evaluations={} optimizer_evaluations={}\n",
                           l.iteration, l.front_size, l.best_loss, l.candidate_evaluations, l.optimizer_evaluations);
    }
}

}  // namespace symgrad
