#include "symgrad/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "symgrad/errors.hpp"
#include "symgrad/symsearch.hpp"
#include "symgrad/textio.hpp"

namespace symgrad {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_dims(const ScalarField& field, std::span<const double> x) {
    if (x.size() != field.dims()) {
        throw UsageError(fmt::format("{} expects {} inputs, got {}", field.name(), field.dims(), x.size()));
    }
}

}  // namespace

TreeField::TreeField(ExprTree tree, std::size_t dims) : tree_(std::move(tree)), dims_(dims) {
    if (dims_ == 0) dims_ = tree_.required_arity();
    if (dims_ < tree_.required_arity()) {
        throw UsageError(fmt::format("tree uses {} variables, field has {}", tree_.required_arity(), dims_));
    }
}

double TreeField::value(std::span<const double> x) const {
    check_dims(*this, x);
    const auto r = tree_.eval(x);
    return r.valid ? r.value : kNaN;
}

void TreeField::gradient(std::span<const double> x, std::span<double> out) const {
    check_dims(*this, x);
    const auto r = tree_.grad(x);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = r.valid ? r.gradient[j] : kNaN;
}

std::string TreeField::name() const { return to_string(tree_); }

double ModelField::value(std::span<const double> x) const {
    check_dims(*this, x);
    return model_->pre_activation(x, neuron_);
}

void ModelField::gradient(std::span<const double> x, std::span<double> out) const {
    check_dims(*this, x);
    const auto g = model_->pre_activation_gradient(x, neuron_);
    std::copy(g.begin(), g.end(), out.begin());
}

ComposedField::ComposedField(std::shared_ptr<const ScalarField> inner, std::function<double(double)> phi,
                             std::function<double(double)> dphi, std::string label)
    : inner_(std::move(inner)), phi_(std::move(phi)), dphi_(std::move(dphi)), label_(std::move(label)) {
    if (!inner_ || !phi_ || !dphi_) throw UsageError("composed field needs an inner field and phi with its derivative");
}

double ComposedField::value(std::span<const double> x) const { return phi_(inner_->value(x)); }

void ComposedField::gradient(std::span<const double> x, std::span<double> out) const {
    inner_->gradient(x, out);
    const double slope = dphi_(inner_->value(x));
    for (double& v : out) v *= slope;
}

AlignmentReport gradient_alignment(const ScalarField& a, const ScalarField& b, const Matrix& probes, double threshold) {
    if (a.dims() != b.dims() || static_cast<std::size_t>(probes.cols()) != a.dims()) {
        throw UsageError(fmt::format("dimension mismatch: fields {} and {}, probes {}", a.dims(), b.dims(), probes.cols()));
    }
    if (probes.rows() == 0) throw UsageError("gradient alignment needs at least one probe");
    const std::size_t d = a.dims();
    std::vector<double> ga(d), gb(d), ua(d), ub(d);
    AlignmentReport report;
    report.threshold = threshold;
    std::vector<Eigen::Index> bad;
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
        const auto x = row_span(probes, i);
        a.gradient(x, ga);
        b.gradient(x, gb);
        const auto finite = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [](double t) { return std::isfinite(t); });
        };
        if (!finite(ga) || !finite(gb)) {
            bad.push_back(i);
            continue;
        }
        normalize_vector(ga, ua);
        normalize_vector(gb, ub);
        const bool za = std::all_of(ga.begin(), ga.end(), [](double t) { return t == 0.0; });
        const bool zb = std::all_of(gb.begin(), gb.end(), [](double t) { return t == 0.0; });
        double cosine = 0.0;
        if (za && zb) cosine = 1.0;
        else if (!za && !zb) cosine = std::clamp(std::inner_product(ua.begin(), ua.end(), ub.begin(), 0.0), -1.0, 1.0);
        report.cosines.push_back(cosine);
    }
    if (!bad.empty()) {
        std::string list;
        for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 10); ++k) list += fmt::format("{}{}", k ? "," : "", bad[k]);
        if (bad.size() > 10) list += ",...";
        throw NumericError(fmt::format("non-finite gradient at {} probe(s): {}", bad.size(), list));
    }
    const double n = static_cast<double>(report.cosines.size());
    report.mean = std::accumulate(report.cosines.begin(), report.cosines.end(), 0.0) / n;
    report.min = *std::min_element(report.cosines.begin(), report.cosines.end());
    report.fraction_above =
        static_cast<double>(std::count_if(report.cosines.begin(), report.cosines.end(), [&](double c) { return c > threshold; })) / n;
    return report;
}

std::string_view direction_name(LinkDirection d) noexcept {
    switch (d) {
    case LinkDirection::Increasing: return "increasing";
    case LinkDirection::Decreasing: return "decreasing";
    case LinkDirection::Undetermined: break;
    }
    return "undetermined";
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw UsageError("spearman: length mismatch");
    if (a.size() < 2) throw UsageError("spearman: need at least two values");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double mean = (n + 1.0) / 2.0;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - mean) * (rb[i] - mean);
        saa += (ra[i] - mean) * (ra[i] - mean);
        sbb += (rb[i] - mean) * (rb[i] - mean);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

LinkReport link_report(const ScalarField& f, const ScalarField& g, const Matrix& probes) {
    if (probes.rows() < 10) throw UsageError(fmt::format("link report needs at least 10 probes, got {}", probes.rows()));
    if (static_cast<std::size_t>(probes.cols()) != f.dims() || f.dims() != g.dims()) {
        throw UsageError("link report: dimension mismatch between fields and probes");
    }
    LinkReport report;
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
        const auto x = row_span(probes, i);
        const double gv = g.value(x);
        const double fv = f.value(x);
        if (!std::isfinite(gv) || !std::isfinite(fv)) throw NumericError(fmt::format("non-finite value at probe {}", i));
        report.pairs.emplace_back(gv, fv);
    }
    std::stable_sort(report.pairs.begin(), report.pairs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (report.pairs.front().first == report.pairs.back().first) {
        throw DegenerateInputError("g is constant on every probe; ranking is undefined");
    }
    std::vector<double> gs, fs;
    for (const auto& [gv, fv] : report.pairs) {
        gs.push_back(gv);
        fs.push_back(fv);
    }
    report.spearman = spearman(gs, fs);
    const bool rising = report.spearman >= 0.0;
    for (std::size_t i = 1; i < fs.size(); ++i) {
        if (rising ? fs[i] < fs[i - 1] : fs[i] > fs[i - 1]) ++report.inversions;
    }
    if (report.spearman >= 0.9) report.direction = LinkDirection::Increasing;
    else if (report.spearman <= -0.9) report.direction = LinkDirection::Decreasing;
    return report;
}

std::string summarize(const LinkReport& report) {
    return fmt::format("probes={}\nspearman={:.17g}\ninversions={}\ndirection={}\n", report.pairs.size(),
                       report.spearman, report.inversions, direction_name(report.direction));
}

std::string summarize(const AlignmentReport& report) {
    return fmt::format("probes={}\nmean_cosine={:.17g}\nmin_cosine={:.17g}\nthreshold={:.17g}\nfraction_above={:.17g}\n",
                       report.cosines.size(), report.mean, report.min, report.threshold, report.fraction_above);
}

void write_link_report(const LinkReport& report, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", csv_path.string()));
    out << "g,f\n";
    for (const auto& [gv, fv] : report.pairs) out << textio::format_double(gv) << ',' << textio::format_double(fv) << '\n';
    auto sidecar = csv_path;
    sidecar.replace_extension(".meta");
    std::ofstream meta(sidecar, std::ios::binary);
    meta << summarize(report);
    if (!out || !meta) throw DataError(fmt::format("write failed for {}", csv_path.string()));
}

}  // namespace symgrad
