#include "symgrad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "symgrad/errors.hpp"
#include "symgrad/textio.hpp"

namespace symgrad {

void SamplingDomain::validate() const {
    if (box.empty()) throw UsageError("sampling domain has no intervals");
    for (std::size_t i = 0; i < box.size(); ++i) {
        if (!(box[i].lo < box[i].hi)) {
            throw UsageError(fmt::format("sampling interval {} is empty: [{}, {}]", i + 1, box[i].lo, box[i].hi));
        }
    }
}

std::string SamplingDomain::to_string() const {
    std::string out;
    for (const auto& iv : box) {
        if (!out.empty()) out += ',';
        out += fmt::format("{}:{}", iv.lo, iv.hi);
    }
    return out;
}

SamplingDomain SamplingDomain::parse(std::string_view text) {
    SamplingDomain d;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find(',', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto item = text.substr(pos, end - pos);
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) throw UsageError(fmt::format("bad interval '{}', expected lo:hi", item));
        try {
            d.box.push_back({textio::parse_double(item.substr(0, colon)), textio::parse_double(item.substr(colon + 1))});
        } catch (const DataError&) {
            throw UsageError(fmt::format("bad interval '{}', expected lo:hi", item));
        }
        pos = end + 1;
    }
    d.validate();
    return d;
}

DecisionFormula decision_formula(int experiment) {
    struct Row {
        std::size_t arity;
        double threshold;
        const char* text;
    };
    static const Row rows[kExperimentCount] = {
        {2, 1.0, "x1*x1 + 2*x2*x2"},
        {2, 5.0, "x1*x1 + 3*x1*x2 + 2*x2*x2"},
        {3, 1.0, "x1*x1 + sin(x2 + x3)"},
        {3, 1.0, "exp(x1 - x2) - 3.141592653589793*x3"},
        {3, 0.2, "x1*exp(-0.5*(x2*x2 + x3*x3))"},
        {6, 1.0, "x1*x2/((x3 - x4)*(x3 - x4) + (x5 - x6)*(x5 - x6))"},
        {4, 2.0, "x1*x2 + x3*x4"},
    };
    if (experiment < 1 || experiment > kExperimentCount) {
        throw UsageError(fmt::format("unknown experiment {} (expected 1..{})", experiment, kExperimentCount));
    }
    const Row& r = rows[experiment - 1];
    return {experiment, r.arity, r.threshold, parse(r.text, r.arity)};
}

SamplingDomain default_domain(int experiment) {
    constexpr double pi = 3.141592653589793;
    switch (experiment) {
    case 1: return {{{-1.5, 1.5}, {-1.5, 1.5}}};
    case 2: return {{{-3.0, 3.0}, {-3.0, 3.0}}};
    case 3: return {{{-1.5, 1.5}, {-pi, pi}, {-pi, pi}}};
    case 4: return {{{-2.0, 2.0}, {-2.0, 2.0}, {-2.0, 2.0}}};
    case 5: return {{{-1.5, 1.5}, {-1.5, 1.5}, {-1.5, 1.5}}};
    case 6: return {{{0.5, 2.0}, {0.5, 2.0}, {-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}}};
    case 7: return {{{0.25, 2.0}, {0.25, 2.0}, {0.25, 2.0}, {0.25, 2.0}}};
    default: throw UsageError(fmt::format("unknown experiment {} (expected 1..{})", experiment, kExperimentCount));
    }
}

double eval_decision(const DecisionFormula& formula, std::span<const double> x) {
    if (x.size() != formula.arity) {
        throw UsageError(fmt::format("experiment {} expects {} inputs, got {}", formula.id, formula.arity, x.size()));
    }
    const auto r = formula.form.eval(x);
    if (!r.valid) {
        std::string point;
        for (double v : x) point += fmt::format("{}{}", point.empty() ? "" : ", ", v);
        throw DomainError(fmt::format("decision formula {} is not finite at ({})", formula.id, point));
    }
    return r.value;
}

void Dataset::validate() const {
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw DataError("feature and label counts differ");
    if (meta.n != y.size()) throw DataError(fmt::format("metadata says {} rows, found {}", meta.n, y.size()));
    if (!X.allFinite()) throw DataError("dataset contains non-finite features");
    bool zero = false;
    bool one = false;
    for (int label : y) {
        if (label == 0) zero = true;
        else if (label == 1) one = true;
        else throw DataError(fmt::format("label {} is not 0 or 1", label));
    }
    if (!zero || !one) throw DataError("dataset contains a single class");
}

namespace {

// Exactly one of the two conjunctions holds: 1 for (x1x2>1 and x3x4>1), 0 for both < 1.
std::optional<int> conjunction_class(std::span<const double> x) {
    const double a = x[0] * x[1];
    const double b = x[2] * x[3];
    if (a > 1.0 && b > 1.0) return 1;
    if (a < 1.0 && b < 1.0) return 0;
    return std::nullopt;
}

double denominator6(std::span<const double> x) {
    return (x[2] - x[3]) * (x[2] - x[3]) + (x[4] - x[5]) * (x[4] - x[5]);
}

}  // namespace

Dataset generate_experiment(const GenerationOptions& options) {
    const DecisionFormula formula = decision_formula(options.experiment);
    if (options.n < 2) throw UsageError("need at least 2 samples");
    if (!(options.noise >= 0.0) || !std::isfinite(options.noise)) throw UsageError("noise must be a finite value >= 0");
    const SamplingDomain domain = options.domain.value_or(default_domain(options.experiment));
    domain.validate();
    if (domain.dims() != formula.arity) {
        throw UsageError(fmt::format("domain has {} intervals, experiment {} needs {}", domain.dims(),
                                     options.experiment, formula.arity));
    }

    const std::size_t dims = formula.arity;
    std::mt19937_64 rng(options.seed);
    std::vector<std::uniform_real_distribution<double>> uniform;
    for (const auto& iv : domain.box) uniform.emplace_back(iv.lo, iv.hi);
    // Standard normal draws happen even without noise so that runs differing only in
    // noise level share the same clean points.
    std::normal_distribution<double> eps(0.0, 1.0);

    Dataset ds;
    ds.X.resize(static_cast<Eigen::Index>(options.n), static_cast<Eigen::Index>(dims));
    ds.y.resize(options.n);
    ds.meta = {options.experiment, options.seed, options.noise, options.n, domain};

    std::vector<double> clean(dims);
    std::vector<double> noisy(dims);
    const std::size_t max_draws = 1000 * options.n;
    std::size_t draws = 0;
    std::size_t kept = 0;
    while (kept < options.n) {
        if (draws++ >= max_draws) {
            throw GenerationError(fmt::format("experiment {}: only {} of {} points accepted after {} draws",
                                              options.experiment, kept, options.n, max_draws));
        }
        for (std::size_t j = 0; j < dims; ++j) clean[j] = uniform[j](rng);
        for (std::size_t j = 0; j < dims; ++j) noisy[j] = clean[j] * (1.0 + options.noise * eps(rng));

        int label = 0;
        if (options.experiment == 7) {
            const auto c = conjunction_class(clean);
            if (!c) continue;
            // The stored (noisy) point must fall in the same conjunction as the clean one.
            if (conjunction_class(noisy) != c) continue;
            label = *c;
        } else {
            if (options.experiment == 6 && std::abs(denominator6(clean)) < 1e-3) continue;
            label = eval_decision(formula, clean) > formula.threshold ? 1 : 0;
        }
        std::copy(noisy.begin(), noisy.end(), row_span(ds.X, static_cast<Eigen::Index>(kept)).begin());
        ds.y[kept] = label;
        ++kept;
    }
    return ds;
}

Dataset take_rows(const Dataset& ds, std::span<const std::size_t> rows) {
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
    out.y.resize(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.X.row(static_cast<Eigen::Index>(k)) = ds.X.row(static_cast<Eigen::Index>(rows[k]));
        out.y[k] = ds.y[rows[k]];
    }
    out.meta = ds.meta;
    out.meta.n = rows.size();
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, Seed seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw UsageError(fmt::format("train fraction {} is outside (0, 1)", train_fraction));
    }
    const std::size_t n = ds.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n) {
        throw UsageError(fmt::format("train fraction {} leaves an empty side for {} rows", train_fraction, n));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::span<const std::size_t> all(order);
    return {take_rows(ds, all.first(n_train)), take_rows(ds, all.subspan(n_train))};
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".meta");
    return p;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", csv_path.string()));
    const auto cols = ds.X.cols();
    for (Eigen::Index j = 0; j < cols; ++j) out << 'x' << (j + 1) << ',';
    out << "label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) out << textio::format_double(ds.X(static_cast<Eigen::Index>(i), j)) << ',';
        out << ds.y[i] << '\n';
    }
    if (!out) throw DataError(fmt::format("write failed for {}", csv_path.string()));
    textio::write_key_values(sidecar_path(csv_path), {
                                                         {"id", std::to_string(ds.meta.experiment)},
                                                         {"seed", std::to_string(ds.meta.seed)},
                                                         {"noise", textio::format_double(ds.meta.noise)},
                                                         {"n", std::to_string(ds.meta.n)},
                                                         {"domain", ds.meta.domain.to_string()},
                                                     });
}

Dataset read_dataset(const std::filesystem::path& csv_path) {
    const auto table = textio::read_csv(csv_path);
    if (table.header.size() < 2 || table.header.back() != "label") {
        throw DataError(fmt::format("{}: expected header x1,...,xn,label", csv_path.string()));
    }
    const std::size_t dims = table.header.size() - 1;
    Dataset ds;
    ds.X = textio::to_matrix(table, 0, dims, csv_path);
    ds.y.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const auto& cell = row.back();
        if (cell != "0" && cell != "1") throw DataError(fmt::format("{}: bad label '{}'", csv_path.string(), cell));
        ds.y.push_back(cell == "1" ? 1 : 0);
    }
    const auto sidecar = sidecar_path(csv_path);
    const auto kv = textio::read_key_values(sidecar);
    ds.meta.experiment = std::stoi(textio::require(kv, "id", sidecar));
    ds.meta.seed = std::stoull(textio::require(kv, "seed", sidecar));
    ds.meta.noise = textio::parse_double(textio::require(kv, "noise", sidecar));
    ds.meta.n = std::stoull(textio::require(kv, "n", sidecar));
    ds.meta.domain = SamplingDomain::parse(textio::require(kv, "domain", sidecar));
    ds.validate();
    return ds;
}

}  // namespace symgrad
