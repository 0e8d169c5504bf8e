#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "symgrad/types.hpp"

namespace symgrad {

enum class Op : std::uint8_t {
    Var,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Exp,
    // Extension operators, disabled in the default operator set.
    Square,
    Log,
};

[[nodiscard]] constexpr int arity_of(Op op) noexcept {
    switch (op) {
    case Op::Var:
    case Op::Const: return 0;
    case Op::Sin:
    case Op::Exp:
    case Op::Square:
    case Op::Log: return 1;
    default: return 2;
    }
}

[[nodiscard]] std::string_view op_name(Op op) noexcept;

struct Node {
    Op op = Op::Const;
    std::uint16_t var = 0;   // variable index (0-based) for Op::Var
    std::uint16_t size = 1;  // node count of the subtree rooted here
    double value = 0.0;      // constant value for Op::Const

    friend bool operator==(const Node&, const Node&) = default;
};

/// Operators the search may place in a tree.
struct OperatorSet {
    bool add = true;
    bool sub = true;
    bool mul = true;
    bool div = true;
    bool sin = true;
    bool exp = true;
    bool square = false;
    bool log = false;

    [[nodiscard]] std::vector<Op> unary() const;
    [[nodiscard]] std::vector<Op> binary() const;
    [[nodiscard]] bool allows(Op op) const noexcept;

    /// Parses a comma-separated list such as "+,-,*,/,sin,exp".
    static OperatorSet parse(std::string_view list);
    [[nodiscard]] std::string to_string() const;
};

struct EvalResult {
    double value = 0.0;
    bool valid = false;
};

struct GradResult {
    std::vector<double> gradient;
    bool valid = false;
};

enum class Precision { Display, Full };

/// Immutable symbolic expression stored as a prefix-ordered node array.
///
/// The first child of node i sits at i + 1; the second child of a binary node
/// sits at i + 1 + nodes[i + 1].size. Every edit returns a new tree.
class ExprTree {
public:
    ExprTree() = default;

    static ExprTree variable(std::size_t index);
    static ExprTree constant(double value);
    static ExprTree unary(Op op, const ExprTree& child);
    static ExprTree binary(Op op, const ExprTree& lhs, const ExprTree& rhs);

    /// Builds a tree from raw prefix nodes; subtree sizes are recomputed and arities checked.
    static ExprTree from_prefix(std::vector<Node> nodes);

    [[nodiscard]] std::span<const Node> nodes() const noexcept { return nodes_; }
    [[nodiscard]] bool empty() const noexcept { return nodes_.empty(); }
    [[nodiscard]] std::size_t complexity() const noexcept { return nodes_.size(); }
    [[nodiscard]] const Node& root() const { return nodes_.front(); }

    /// Number of variables the tree needs: highest variable index + 1 (0 if none).
    [[nodiscard]] std::size_t required_arity() const noexcept;
    [[nodiscard]] std::vector<std::size_t> variables_used() const;
    [[nodiscard]] std::size_t constant_count() const noexcept;
    [[nodiscard]] std::vector<double> constants() const;
    [[nodiscard]] ExprTree with_constants(std::span<const double> values) const;

    [[nodiscard]] std::size_t first_child(std::size_t i) const noexcept { return i + 1; }
    [[nodiscard]] std::size_t second_child(std::size_t i) const noexcept { return i + 1 + nodes_[i + 1].size; }

    [[nodiscard]] ExprTree subtree(std::size_t i) const;
    [[nodiscard]] ExprTree replace_subtree(std::size_t i, const ExprTree& replacement) const;

    [[nodiscard]] EvalResult eval(std::span<const double> x) const;
    [[nodiscard]] GradResult grad(std::span<const double> x) const;

    friend bool operator==(const ExprTree&, const ExprTree&) = default;

private:
    explicit ExprTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}
    void recompute_sizes();

    std::vector<Node> nodes_;
};

/// Reusable scratch space for evaluating one tree over many points.
///
/// Values and gradients are computed node by node across the whole batch, so the
/// branch on the operator is taken once per node rather than once per point.
class BatchEvaluator {
public:
    /// Evaluates the tree on the given rows of `x`. Afterwards `values()[k]` and
    /// `valid()[k]` refer to `rows[k]`.
    void evaluate(const ExprTree& tree, const Matrix& x, std::span<const std::size_t> rows);

    /// As `evaluate`, also computing the input gradient; `gradient(k)` has `x.cols()` entries.
    void evaluate_with_gradient(const ExprTree& tree, const Matrix& x, std::span<const std::size_t> rows);

    [[nodiscard]] std::span<const double> values() const noexcept { return {values_.data(), points_}; }
    [[nodiscard]] std::span<const char> valid() const noexcept { return {valid_.data(), points_}; }
    [[nodiscard]] std::span<const double> gradient(std::size_t k) const noexcept {
        return {gradients_.data() + k * dims_, dims_};
    }

private:
    template <bool WithGradient>
    void run(const ExprTree& tree, const Matrix& x, std::span<const std::size_t> rows);

    std::size_t points_ = 0;
    std::size_t dims_ = 0;
    std::vector<double> node_values_;
    std::vector<double> node_grads_;
    std::vector<double> values_;
    std::vector<double> gradients_;
    std::vector<char> valid_;
};

/// Constant folding plus the identities x+0, x-0, x*1, x*0, x-x, x/1 and merging of
/// nested constant factors/offsets. Never increases complexity.
[[nodiscard]] ExprTree simplify(const ExprTree& tree);

/// Infix text with parentheses, sin()/exp() calls, decimal constants and variables x1..xn.
/// When `arity` is given, variables beyond it are rejected.
[[nodiscard]] ExprTree parse(std::string_view text, std::optional<std::size_t> arity = std::nullopt);

/// Minimal-parenthesis infix text; `Precision::Full` prints constants in shortest round-trip form.
[[nodiscard]] std::string to_string(const ExprTree& tree, Precision precision = Precision::Display);

/// Grows a random tree with exactly `size` nodes when possible (smaller if `size` is
/// even and no unary operator is enabled).
[[nodiscard]] ExprTree random_tree(std::mt19937_64& rng, std::size_t arity, std::size_t size,
                                   const OperatorSet& ops, double constant_probability = 0.3);

}  // namespace symgrad
