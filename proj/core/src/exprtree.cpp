#include "symgrad/exprtree.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "symgrad/errors.hpp"

namespace symgrad {

std::string_view op_name(Op op) noexcept {
    switch (op) {
    case Op::Var: return "var";
    case Op::Const: return "const";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Sin: return "sin";
    case Op::Exp: return "exp";
    case Op::Square: return "square";
    case Op::Log: return "log";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// OperatorSet

std::vector<Op> OperatorSet::unary() const {
    std::vector<Op> out;
    if (sin) out.push_back(Op::Sin);
    if (exp) out.push_back(Op::Exp);
    if (square) out.push_back(Op::Square);
    if (log) out.push_back(Op::Log);
    return out;
}

std::vector<Op> OperatorSet::binary() const {
    std::vector<Op> out;
    if (add) out.push_back(Op::Add);
    if (sub) out.push_back(Op::Sub);
    if (mul) out.push_back(Op::Mul);
    if (div) out.push_back(Op::Div);
    return out;
}

bool OperatorSet::allows(Op op) const noexcept {
    switch (op) {
    case Op::Var:
    case Op::Const: return true;
    case Op::Add: return add;
    case Op::Sub: return sub;
    case Op::Mul: return mul;
    case Op::Div: return div;
    case Op::Sin: return sin;
    case Op::Exp: return exp;
    case Op::Square: return square;
    case Op::Log: return log;
    }
    return false;
}

OperatorSet OperatorSet::parse(std::string_view list) {
    OperatorSet set{false, false, false, false, false, false, false, false};
    std::size_t pos = 0;
    while (pos <= list.size()) {
        auto end = list.find(',', pos);
        if (end == std::string_view::npos) end = list.size();
        auto token = list.substr(pos, end - pos);
        while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front()))) token.remove_prefix(1);
        while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) token.remove_suffix(1);
        if (token == "+") set.add = true;
        else if (token == "-") set.sub = true;
        else if (token == "*") set.mul = true;
        else if (token == "/") set.div = true;
        else if (token == "sin") set.sin = true;
        else if (token == "exp") set.exp = true;
        else if (token == "square") set.square = true;
        else if (token == "log") set.log = true;
        else if (!token.empty()) throw UsageError(fmt::format("unknown operator '{}'", token));
        pos = end + 1;
    }
    if (set.binary().empty() && set.unary().empty()) throw UsageError("operator set is empty");
    return set;
}

std::string OperatorSet::to_string() const {
    std::string out;
    auto append = [&](bool on, std::string_view name) {
        if (!on) return;
        if (!out.empty()) out += ',';
        out += name;
    };
    append(add, "+");
    append(sub, "-");
    append(mul, "*");
    append(div, "/");
    append(sin, "sin");
    append(exp, "exp");
    append(square, "square");
    append(log, "log");
    return out;
}

// ---------------------------------------------------------------------------
// ExprTree construction

ExprTree ExprTree::variable(std::size_t index) {
    Node n;
    n.op = Op::Var;
    n.var = static_cast<std::uint16_t>(index);
    return ExprTree({n});
}

ExprTree ExprTree::constant(double value) {
    Node n;
    n.op = Op::Const;
    n.value = value;
    return ExprTree({n});
}

ExprTree ExprTree::unary(Op op, const ExprTree& child) {
    if (arity_of(op) != 1) throw UsageError(fmt::format("'{}' is not a unary operator", op_name(op)));
    std::vector<Node> nodes;
    nodes.reserve(child.nodes_.size() + 1);
    Node n;
    n.op = op;
    n.size = static_cast<std::uint16_t>(child.nodes_.size() + 1);
    nodes.push_back(n);
    nodes.insert(nodes.end(), child.nodes_.begin(), child.nodes_.end());
    return ExprTree(std::move(nodes));
}

ExprTree ExprTree::binary(Op op, const ExprTree& lhs, const ExprTree& rhs) {
    if (arity_of(op) != 2) throw UsageError(fmt::format("'{}' is not a binary operator", op_name(op)));
    std::vector<Node> nodes;
    nodes.reserve(lhs.nodes_.size() + rhs.nodes_.size() + 1);
    Node n;
    n.op = op;
    n.size = static_cast<std::uint16_t>(lhs.nodes_.size() + rhs.nodes_.size() + 1);
    nodes.push_back(n);
    nodes.insert(nodes.end(), lhs.nodes_.begin(), lhs.nodes_.end());
    nodes.insert(nodes.end(), rhs.nodes_.begin(), rhs.nodes_.end());
    return ExprTree(std::move(nodes));
}

ExprTree ExprTree::from_prefix(std::vector<Node> nodes) {
    ExprTree t(std::move(nodes));
    t.recompute_sizes();
    return t;
}

void ExprTree::recompute_sizes() {
    // Walk backwards keeping a stack of subtree sizes; children always follow their parent.
    std::vector<std::uint16_t> stack;
    stack.reserve(nodes_.size());
    for (std::size_t k = nodes_.size(); k-- > 0;) {
        auto& n = nodes_[k];
        const int a = arity_of(n.op);
        if (static_cast<int>(stack.size()) < a) throw UsageError("malformed prefix expression: missing operand");
        std::size_t size = 1;
        for (int c = 0; c < a; ++c) {
            size += stack.back();
            stack.pop_back();
        }
        n.size = static_cast<std::uint16_t>(size);
        stack.push_back(n.size);
    }
    if (stack.size() != 1 && !nodes_.empty()) throw UsageError("malformed prefix expression: dangling operands");
}

std::size_t ExprTree::required_arity() const noexcept {
    std::size_t arity = 0;
    for (const auto& n : nodes_) {
        if (n.op == Op::Var) arity = std::max<std::size_t>(arity, n.var + 1u);
    }
    return arity;
}

std::vector<std::size_t> ExprTree::variables_used() const {
    std::vector<std::size_t> vars;
    for (const auto& n : nodes_) {
        if (n.op == Op::Var) vars.push_back(n.var);
    }
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    return vars;
}

std::size_t ExprTree::constant_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.op == Op::Const; }));
}

std::vector<double> ExprTree::constants() const {
    std::vector<double> out;
    for (const auto& n : nodes_) {
        if (n.op == Op::Const) out.push_back(n.value);
    }
    return out;
}

ExprTree ExprTree::with_constants(std::span<const double> values) const {
    if (values.size() != constant_count()) throw UsageError("constant vector length does not match tree");
    ExprTree out = *this;
    std::size_t k = 0;
    for (auto& n : out.nodes_) {
        if (n.op == Op::Const) n.value = values[k++];
    }
    return out;
}

ExprTree ExprTree::subtree(std::size_t i) const {
    return ExprTree(std::vector<Node>(nodes_.begin() + static_cast<std::ptrdiff_t>(i),
                                      nodes_.begin() + static_cast<std::ptrdiff_t>(i + nodes_[i].size)));
}

ExprTree ExprTree::replace_subtree(std::size_t i, const ExprTree& replacement) const {
    std::vector<Node> nodes;
    nodes.reserve(nodes_.size() - nodes_[i].size + replacement.nodes_.size());
    nodes.insert(nodes.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(i));
    nodes.insert(nodes.end(), replacement.nodes_.begin(), replacement.nodes_.end());
    nodes.insert(nodes.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(i + nodes_[i].size), nodes_.end());
    return from_prefix(std::move(nodes));
}

EvalResult ExprTree::eval(std::span<const double> x) const {
    Matrix m(1, static_cast<Eigen::Index>(x.size()));
    std::copy(x.begin(), x.end(), m.data());
    const std::size_t row = 0;
    BatchEvaluator ev;
    ev.evaluate(*this, m, std::span<const std::size_t>(&row, 1));
    return {ev.values()[0], ev.valid()[0] != 0};
}

GradResult ExprTree::grad(std::span<const double> x) const {
    Matrix m(1, static_cast<Eigen::Index>(x.size()));
    std::copy(x.begin(), x.end(), m.data());
    const std::size_t row = 0;
    BatchEvaluator ev;
    ev.evaluate_with_gradient(*this, m, std::span<const std::size_t>(&row, 1));
    auto g = ev.gradient(0);
    return {std::vector<double>(g.begin(), g.end()), ev.valid()[0] != 0};
}

// ---------------------------------------------------------------------------
// Batch evaluation

void BatchEvaluator::evaluate(const ExprTree& tree, const Matrix& x, std::span<const std::size_t> rows) {
    run<false>(tree, x, rows);
}

void BatchEvaluator::evaluate_with_gradient(const ExprTree& tree, const Matrix& x,
                                            std::span<const std::size_t> rows) {
    run<true>(tree, x, rows);
}

template <bool WithGradient>
void BatchEvaluator::run(const ExprTree& tree, const Matrix& x, std::span<const std::size_t> rows) {
    const auto nodes = tree.nodes();
    const std::size_t count = nodes.size();
    const std::size_t points = rows.size();
    const std::size_t dims = static_cast<std::size_t>(x.cols());
    if (tree.required_arity() > dims) {
        throw UsageError(fmt::format("tree uses {} variables but points have {}", tree.required_arity(), dims));
    }
    points_ = points;
    dims_ = dims;
    node_values_.resize(count * points);
    values_.resize(points);
    valid_.assign(points, 1);
    if constexpr (WithGradient) {
        node_grads_.resize(count * points * dims);
        gradients_.resize(points * dims);
    }

    const std::size_t stride = points * dims;
    for (std::size_t i = count; i-- > 0;) {
        const Node& n = nodes[i];
        double* v = node_values_.data() + i * points;
        double* g = WithGradient ? node_grads_.data() + i * stride : nullptr;
        switch (n.op) {
        case Op::Var:
            for (std::size_t p = 0; p < points; ++p) v[p] = x(static_cast<Eigen::Index>(rows[p]), n.var);
            if constexpr (WithGradient) {
                std::fill(g, g + stride, 0.0);
                for (std::size_t p = 0; p < points; ++p) g[p * dims + n.var] = 1.0;
            }
            break;
        case Op::Const:
            std::fill(v, v + points, n.value);
            if constexpr (WithGradient) std::fill(g, g + stride, 0.0);
            break;
        case Op::Sin:
        case Op::Exp:
        case Op::Square:
        case Op::Log: {
            const std::size_t c = i + 1;
            const double* a = node_values_.data() + c * points;
            const double* ga = WithGradient ? node_grads_.data() + c * stride : nullptr;
            for (std::size_t p = 0; p < points; ++p) {
                double val = 0.0;
                double d = 0.0;
                switch (n.op) {
                case Op::Sin:
                    val = std::sin(a[p]);
                    if constexpr (WithGradient) d = std::cos(a[p]);
                    break;
                case Op::Exp:
                    val = std::exp(a[p]);
                    d = val;
                    break;
                case Op::Square:
                    val = a[p] * a[p];
                    d = 2.0 * a[p];
                    break;
                default:
                    val = a[p] > 0.0 ? std::log(a[p]) : std::numeric_limits<double>::quiet_NaN();
                    d = 1.0 / a[p];
                    break;
                }
                v[p] = val;
                if constexpr (WithGradient) {
                    for (std::size_t j = 0; j < dims; ++j) g[p * dims + j] = d * ga[p * dims + j];
                }
            }
            break;
        }
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            const std::size_t cl = i + 1;
            const std::size_t cr = i + 1 + nodes[cl].size;
            const double* a = node_values_.data() + cl * points;
            const double* b = node_values_.data() + cr * points;
            const double* ga = WithGradient ? node_grads_.data() + cl * stride : nullptr;
            const double* gb = WithGradient ? node_grads_.data() + cr * stride : nullptr;
            switch (n.op) {
            case Op::Add:
                for (std::size_t p = 0; p < points; ++p) v[p] = a[p] + b[p];
                if constexpr (WithGradient)
                    for (std::size_t k = 0; k < stride; ++k) g[k] = ga[k] + gb[k];
                break;
            case Op::Sub:
                for (std::size_t p = 0; p < points; ++p) v[p] = a[p] - b[p];
                if constexpr (WithGradient)
                    for (std::size_t k = 0; k < stride; ++k) g[k] = ga[k] - gb[k];
                break;
            case Op::Mul:
                for (std::size_t p = 0; p < points; ++p) {
                    v[p] = a[p] * b[p];
                    if constexpr (WithGradient)
                        for (std::size_t j = 0; j < dims; ++j)
                            g[p * dims + j] = ga[p * dims + j] * b[p] + a[p] * gb[p * dims + j];
                }
                break;
            default:
                for (std::size_t p = 0; p < points; ++p) {
                    v[p] = a[p] / b[p];
                    if constexpr (WithGradient) {
                        const double inv = 1.0 / b[p];
                        for (std::size_t j = 0; j < dims; ++j)
                            g[p * dims + j] = (ga[p * dims + j] - v[p] * gb[p * dims + j]) * inv;
                    }
                }
                break;
            }
            break;
        }
        }
        // A non-finite intermediate poisons the point.
        for (std::size_t p = 0; p < points; ++p) {
            if (!std::isfinite(v[p])) valid_[p] = 0;
        }
        if constexpr (WithGradient) {
            for (std::size_t p = 0; p < points; ++p) {
                for (std::size_t j = 0; j < dims; ++j) {
                    if (!std::isfinite(g[p * dims + j])) valid_[p] = 0;
                }
            }
        }
    }

    if (count == 0) {
        std::fill(values_.begin(), values_.end(), 0.0);
        std::fill(valid_.begin(), valid_.end(), 0);
        return;
    }
    std::copy(node_values_.begin(), node_values_.begin() + static_cast<std::ptrdiff_t>(points), values_.begin());
    if constexpr (WithGradient) {
        std::copy(node_grads_.begin(), node_grads_.begin() + static_cast<std::ptrdiff_t>(stride), gradients_.begin());
    }
}

template void BatchEvaluator::run<false>(const ExprTree&, const Matrix&, std::span<const std::size_t>);
template void BatchEvaluator::run<true>(const ExprTree&, const Matrix&, std::span<const std::size_t>);

// ---------------------------------------------------------------------------
// Simplification

namespace {

bool is_const(const ExprTree& t) { return t.complexity() == 1 && t.root().op == Op::Const; }
bool is_const(const ExprTree& t, double v) { return is_const(t) && t.root().value == v; }

double apply_unary(Op op, double a) {
    switch (op) {
    case Op::Sin: return std::sin(a);
    case Op::Exp: return std::exp(a);
    case Op::Square: return a * a;
    case Op::Log: return a > 0.0 ? std::log(a) : std::numeric_limits<double>::quiet_NaN();
    default: return std::numeric_limits<double>::quiet_NaN();
    }
}

double apply_binary(Op op, double a, double b) {
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    default: return std::numeric_limits<double>::quiet_NaN();
    }
}

ExprTree simplify_at(const ExprTree& t, std::size_t i) {
    const Node& n = t.nodes()[i];
    const int a = arity_of(n.op);
    if (a == 0) return t.subtree(i);

    if (a == 1) {
        ExprTree child = simplify_at(t, t.first_child(i));
        if (is_const(child)) {
            const double v = apply_unary(n.op, child.root().value);
            if (std::isfinite(v)) return ExprTree::constant(v);
        }
        return ExprTree::unary(n.op, child);
    }

    ExprTree lhs = simplify_at(t, t.first_child(i));
    ExprTree rhs = simplify_at(t, t.second_child(i));
    if (is_const(lhs) && is_const(rhs)) {
        const double v = apply_binary(n.op, lhs.root().value, rhs.root().value);
        if (std::isfinite(v)) return ExprTree::constant(v);
        return ExprTree::binary(n.op, lhs, rhs);
    }

    switch (n.op) {
    case Op::Add:
        if (is_const(lhs, 0.0)) return rhs;
        if (is_const(rhs, 0.0)) return lhs;
        // c1 + (c2 + e) and c1 + (e + c2) -> (c1 + c2) + e
        if (is_const(lhs) && rhs.root().op == Op::Add) {
            const auto l2 = rhs.subtree(1);
            const auto r2 = rhs.subtree(rhs.second_child(0));
            if (is_const(l2)) return ExprTree::binary(Op::Add, ExprTree::constant(lhs.root().value + l2.root().value), r2);
            if (is_const(r2)) return ExprTree::binary(Op::Add, ExprTree::constant(lhs.root().value + r2.root().value), l2);
        }
        break;
    case Op::Sub:
        if (is_const(rhs, 0.0)) return lhs;
        if (lhs == rhs) return ExprTree::constant(0.0);
        break;
    case Op::Mul:
        if (is_const(lhs, 1.0)) return rhs;
        if (is_const(rhs, 1.0)) return lhs;
        if (is_const(lhs, 0.0) || is_const(rhs, 0.0)) return ExprTree::constant(0.0);
        // c1 * (c2 * e) and c1 * (e * c2) -> (c1 * c2) * e
        if (is_const(lhs) && rhs.root().op == Op::Mul) {
            const auto l2 = rhs.subtree(1);
            const auto r2 = rhs.subtree(rhs.second_child(0));
            if (is_const(l2)) return ExprTree::binary(Op::Mul, ExprTree::constant(lhs.root().value * l2.root().value), r2);
            if (is_const(r2)) return ExprTree::binary(Op::Mul, ExprTree::constant(lhs.root().value * r2.root().value), l2);
        }
        break;
    case Op::Div:
        if (is_const(rhs, 1.0)) return lhs;
        break;
    default: break;
    }
    return ExprTree::binary(n.op, lhs, rhs);
}

}  // namespace

ExprTree simplify(const ExprTree& tree) {
    if (tree.empty()) return tree;
    return simplify_at(tree, 0);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
public:
    Parser(std::string_view text, std::optional<std::size_t> arity) : text_(text), arity_(arity) {}

    ExprTree parse() {
        skip_ws();
        if (pos_ == text_.size()) fail("empty expression");
        ExprTree t = expression();
        skip_ws();
        if (pos_ != text_.size()) fail(fmt::format("unexpected '{}'", text_[pos_]));
        return t;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError("syntax error: " + msg, pos_); }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    ExprTree expression() {
        ExprTree lhs = term();
        for (;;) {
            if (accept('+')) lhs = ExprTree::binary(Op::Add, lhs, term());
            else if (accept('-')) lhs = ExprTree::binary(Op::Sub, lhs, term());
            else return lhs;
        }
    }

    ExprTree term() {
        ExprTree lhs = factor();
        for (;;) {
            if (accept('*')) lhs = ExprTree::binary(Op::Mul, lhs, factor());
            else if (accept('/')) lhs = ExprTree::binary(Op::Div, lhs, factor());
            else return lhs;
        }
    }

    ExprTree factor() {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '-') {
            const bool numeric = pos_ + 1 < text_.size() &&
                                 (std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) || text_[pos_ + 1] == '.');
            if (numeric) return number();
            ++pos_;
            return ExprTree::binary(Op::Mul, ExprTree::constant(-1.0), factor());
        }
        return primary();
    }

    ExprTree number() {
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc{}) fail("invalid number");
        pos_ += static_cast<std::size_t>(ptr - begin);
        return ExprTree::constant(value);
    }

    ExprTree primary() {
        skip_ws();
        if (pos_ == text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            ExprTree inner = expression();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            const std::string_view word = text_.substr(start, pos_ - start);
            if (word.size() > 1 && word[0] == 'x' &&
                std::all_of(word.begin() + 1, word.end(), [](char d) { return std::isdigit(static_cast<unsigned char>(d)); })) {
                std::size_t index = 0;
                std::from_chars(word.data() + 1, word.data() + word.size(), index);
                if (index == 0) {
                    pos_ = start;
                    fail("variables are numbered from x1");
                }
                if (arity_ && index > *arity_) {
                    pos_ = start;
                    throw ParseError(fmt::format("arity violation: '{}' exceeds {} variables", word, *arity_), start);
                }
                return ExprTree::variable(index - 1);
            }
            Op op{};
            if (word == "sin") op = Op::Sin;
            else if (word == "exp") op = Op::Exp;
            else if (word == "square") op = Op::Square;
            else if (word == "log") op = Op::Log;
            else {
                pos_ = start;
                fail(fmt::format("unknown identifier '{}'", word));
            }
            if (!accept('(')) fail(fmt::format("expected '(' after {}", word));
            ExprTree arg = expression();
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == ',') {
                throw ParseError(fmt::format("arity violation: {} takes one argument", word), pos_);
            }
            if (!accept(')')) fail("expected ')'");
            return ExprTree::unary(op, arg);
        }
        fail(fmt::format("unexpected '{}'", c));
    }

    std::string_view text_;
    std::optional<std::size_t> arity_;
    std::size_t pos_ = 0;
};

int precedence(const Node& n) {
    switch (n.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    default: return 3;
    }
}

std::string format_constant(double v, Precision p) {
    if (p == Precision::Full) return fmt::format("{}", v);
    return fmt::format("{:.6g}", v);
}

void print(const ExprTree& t, std::size_t i, Precision p, std::string& out) {
    const Node& n = t.nodes()[i];
    switch (n.op) {
    case Op::Var: out += fmt::format("x{}", n.var + 1); return;
    case Op::Const: out += format_constant(n.value, p); return;
    case Op::Sin:
    case Op::Exp:
    case Op::Square:
    case Op::Log:
        out += op_name(n.op);
        out += '(';
        print(t, t.first_child(i), p, out);
        out += ')';
        return;
    default: break;
    }
    const std::size_t l = t.first_child(i);
    const std::size_t r = t.second_child(i);
    const int prec = precedence(n);
    const bool wrap_l = precedence(t.nodes()[l]) < prec;
    // Left-associative parsing means an equal-precedence right operand needs parentheses;
    // negative constants on the right are wrapped for readability.
    const Node& rn = t.nodes()[r];
    const bool wrap_r = precedence(rn) <= prec || (rn.op == Op::Const && std::signbit(rn.value));
    if (wrap_l) out += '(';
    print(t, l, p, out);
    if (wrap_l) out += ')';
    out += ' ';
    out += op_name(n.op);
    out += ' ';
    if (wrap_r) out += '(';
    print(t, r, p, out);
    if (wrap_r) out += ')';
}

}  // namespace

ExprTree parse(std::string_view text, std::optional<std::size_t> arity) { return Parser(text, arity).parse(); }

std::string to_string(const ExprTree& tree, Precision precision) {
    if (tree.empty()) return {};
    std::string out;
    print(tree, 0, precision, out);
    return out;
}

// ---------------------------------------------------------------------------
// Random trees

namespace {

ExprTree grow(std::mt19937_64& rng, std::size_t arity, std::size_t size, const std::vector<Op>& unary,
              const std::vector<Op>& binary, double constant_probability) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (size <= 1 || (unary.empty() && binary.empty())) {
        if (arity == 0 || unit(rng) < constant_probability) {
            std::normal_distribution<double> normal(0.0, 1.0);
            return ExprTree::constant(normal(rng));
        }
        std::uniform_int_distribution<std::size_t> pick(0, arity - 1);
        return ExprTree::variable(pick(rng));
    }
    if (unary.empty() && size % 2 == 0) --size;
    if (size <= 1) return grow(rng, arity, 1, unary, binary, constant_probability);

    const bool can_unary = !unary.empty();
    const bool can_binary = !binary.empty() && size >= 3;
    bool use_unary = can_unary && (!can_binary || unit(rng) < 0.25);
    if (use_unary) {
        std::uniform_int_distribution<std::size_t> pick(0, unary.size() - 1);
        const Op op = unary[pick(rng)];
        return ExprTree::unary(op, grow(rng, arity, size - 1, unary, binary, constant_probability));
    }
    std::uniform_int_distribution<std::size_t> pick(0, binary.size() - 1);
    const Op op = binary[pick(rng)];
    std::size_t left = 1;
    const std::size_t rest = size - 1;
    if (unary.empty()) {
        // Binary-only trees have odd sizes; split the remainder into two odd parts.
        std::uniform_int_distribution<std::size_t> half(0, (rest - 2) / 2);
        left = 2 * half(rng) + 1;
    } else {
        std::uniform_int_distribution<std::size_t> split(1, rest - 1);
        left = split(rng);
    }
    auto lhs = grow(rng, arity, left, unary, binary, constant_probability);
    auto rhs = grow(rng, arity, rest - left, unary, binary, constant_probability);
    return ExprTree::binary(op, lhs, rhs);
}

}  // namespace

ExprTree random_tree(std::mt19937_64& rng, std::size_t arity, std::size_t size, const OperatorSet& ops,
                     double constant_probability) {
    return grow(rng, arity, std::max<std::size_t>(size, 1), ops.unary(), ops.binary(), constant_probability);
}

}  // namespace symgrad
