#include "symgrad/gradients.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "symgrad/errors.hpp"
#include "symgrad/textio.hpp"

namespace symgrad {

void ExtractionConfig::validate() const {
    if (!(delta > 0.0 && delta < 0.5)) throw UsageError(fmt::format("delta {} outside (0, 0.5)", delta));
    if (augment) {
        if (!(augment->scale > 0.0)) throw UsageError("augmentation scale must be positive");
        if (augment->count == 0) throw UsageError("augmentation count must be at least 1");
    }
}

std::vector<std::size_t> confident_rows(const MlpModel& model, const Matrix& x, double delta) {
    if (!(delta > 0.0 && delta < 0.5)) throw UsageError(fmt::format("delta {} outside (0, 0.5)", delta));
    const Vector f = model.latent_batch(x);
    std::vector<std::size_t> keep;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double p = sigmoid(f(i));
        if (p >= delta && p <= 1.0 - delta) keep.push_back(static_cast<std::size_t>(i));
    }
    return keep;
}

Matrix filter_confident(const MlpModel& model, const Matrix& x, double delta) {
    const auto keep = confident_rows(model, x, delta);
    if (keep.empty()) {
        throw ExtractionError(fmt::format(
            "no point has F(x) in [{}, {}]; use a larger delta or more data", delta, 1.0 - delta));
    }
    Matrix out(static_cast<Eigen::Index>(keep.size()), x.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(keep[k]));
    return out;
}

void normalize_rows(Matrix& g) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const double norm = g.row(i).stableNorm();
        if (norm > 0.0) g.row(i) /= norm;
    }
}

namespace {

Matrix augmented_points(const Dataset& ds, const ExtractionConfig& cfg) {
    if (!cfg.augment) return ds.X;
    const auto& aug = *cfg.augment;
    const Eigen::Index n = ds.X.rows();
    const Eigen::Index d = ds.X.cols();
    const Eigen::RowVectorXd mean = ds.X.colwise().mean();
    Eigen::RowVectorXd stddev(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        stddev(j) = std::sqrt((ds.X.col(j).array() - mean(j)).square().mean());
    }
    Matrix out(n * static_cast<Eigen::Index>(1 + aug.count), d);
    out.topRows(n) = ds.X;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Index r = n;
    for (std::size_t c = 0; c < aug.count; ++c) {
        for (Eigen::Index i = 0; i < n; ++i, ++r) {
            for (Eigen::Index j = 0; j < d; ++j) out(r, j) = ds.X(i, j) + aug.scale * stddev(j) * normal(rng);
        }
    }
    return out;
}

}  // namespace

GradientSet extract(const MlpModel& model, const Dataset& ds, const ExtractionConfig& cfg) {
    cfg.validate();
    if (ds.features() != model.input_dim()) {
        throw UsageError(fmt::format("model expects {} features, dataset has {}", model.input_dim(), ds.features()));
    }
    const Matrix candidates = augmented_points(ds, cfg);
    GradientSet gs;
    gs.X = filter_confident(model, candidates, cfg.delta);
    gs.G = model.gradient_batch(gs.X, cfg.neuron);
    normalize_rows(gs.G);
    gs.provenance = {model_hash(model), cfg.delta, ds.meta, static_cast<std::size_t>(candidates.rows())};
    return gs;
}

void write_gradient_set(const GradientSet& gs, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", csv_path.string()));
    const Eigen::Index d = gs.X.cols();
    for (Eigen::Index j = 0; j < d; ++j) out << 'x' << (j + 1) << ',';
    for (Eigen::Index j = 0; j < d; ++j) out << 'g' << (j + 1) << (j + 1 < d ? "," : "\n");
    for (Eigen::Index i = 0; i < gs.X.rows(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) out << textio::format_double(gs.X(i, j)) << ',';
        for (Eigen::Index j = 0; j < d; ++j) out << textio::format_double(gs.G(i, j)) << (j + 1 < d ? "," : "\n");
    }
    if (!out) throw DataError(fmt::format("write failed for {}", csv_path.string()));
    const auto& p = gs.provenance;
    textio::write_key_values(sidecar_path(csv_path), {
                                                         {"delta", textio::format_double(p.delta)},
                                                         {"model_hash", p.model_hash},
                                                         {"rows", std::to_string(gs.size())},
                                                         {"candidates", std::to_string(p.candidates)},
                                                         {"features", std::to_string(gs.features())},
                                                         {"source_id", std::to_string(p.source.experiment)},
                                                         {"source_seed", std::to_string(p.source.seed)},
                                                         {"source_noise", textio::format_double(p.source.noise)},
                                                         {"source_n", std::to_string(p.source.n)},
                                                         {"source_domain", p.source.domain.to_string()},
                                                     });
}

GradientSet read_gradient_set(const std::filesystem::path& csv_path) {
    const auto table = textio::read_csv(csv_path);
    if (table.header.size() < 2 || table.header.size() % 2 != 0) {
        throw DataError(fmt::format("{}: expected header x1..xn,g1..gn", csv_path.string()));
    }
    const std::size_t d = table.header.size() / 2;
    GradientSet gs;
    gs.X = textio::to_matrix(table, 0, d, csv_path);
    gs.G = textio::to_matrix(table, d, d, csv_path);
    const auto sidecar = sidecar_path(csv_path);
    const auto kv = textio::read_key_values(sidecar);
    auto& p = gs.provenance;
    p.delta = textio::parse_double(textio::require(kv, "delta", sidecar));
    p.model_hash = textio::require(kv, "model_hash", sidecar);
    p.candidates = std::stoull(textio::require(kv, "candidates", sidecar));
    p.source.experiment = std::stoi(textio::require(kv, "source_id", sidecar));
    p.source.seed = std::stoull(textio::require(kv, "source_seed", sidecar));
    p.source.noise = textio::parse_double(textio::require(kv, "source_noise", sidecar));
    p.source.n = std::stoull(textio::require(kv, "source_n", sidecar));
    p.source.domain = SamplingDomain::parse(textio::require(kv, "source_domain", sidecar));
    if (std::stoull(textio::require(kv, "rows", sidecar)) != gs.size()) {
        throw DataError(fmt::format("{}: row count disagrees with its sidecar", csv_path.string()));
    }
    return gs;
}

}  // namespace symgrad
