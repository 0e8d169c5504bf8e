#pragma once

// Checks whether an expression is evaluation-equivalent to an affine combination of
// known terms: T(x) ~ sum_k a_k term_k(x) + b, by least squares over probe points.

#include <functional>
#include <span>
#include <vector>

#include "oracles.hpp"
#include "symgrad/exprtree.hpp"
#include "symgrad/types.hpp"

namespace forms {

using Term = std::function<double(std::span<const double>)>;

/// Coefficients a_1..a_k then b, and R^2. R^2 is 0 if the tree is invalid on any probe.
inline oracle::Fit affine_fit(const symgrad::ExprTree& tree, const symgrad::Matrix& probes, const std::vector<Term>& terms) {
    std::vector<std::vector<double>> basis;
    std::vector<double> y;
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
        const auto x = symgrad::row_span(probes, i);
        if (tree.required_arity() > x.size()) return {};
        const auto r = tree.eval(x);
        if (!r.valid) return {};
        std::vector<double> row;
        for (const auto& t : terms) row.push_back(t(x));
        row.push_back(1.0);
        basis.push_back(std::move(row));
        y.push_back(r.value);
    }
    return oracle::least_squares(basis, y);
}

}  // namespace forms
