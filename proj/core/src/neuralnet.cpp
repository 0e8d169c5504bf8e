#include "symgrad/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "symgrad/errors.hpp"
#include "symgrad/hashing.hpp"

namespace symgrad {

double activate(Activation a, double z) noexcept {
    switch (a) {
    case Activation::Elu: return z > 0.0 ? z : std::expm1(z);
    case Activation::Sigmoid: return sigmoid(z);
    case Activation::Identity: return z;
    }
    return z;
}

double activation_derivative(Activation a, double z) noexcept {
    switch (a) {
    case Activation::Elu: return z > 0.0 ? 1.0 : std::exp(z);
    case Activation::Sigmoid: {
        const double s = sigmoid(z);
        return s * (1.0 - s);
    }
    case Activation::Identity: return 1.0;
    }
    return 1.0;
}

std::string_view activation_name(Activation a) noexcept {
    switch (a) {
    case Activation::Elu: return "elu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
    }
    return "?";
}

Activation parse_activation(std::string_view name) {
    if (name == "elu") return Activation::Elu;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "identity") return Activation::Identity;
    throw DataError(fmt::format("unknown activation '{}'", name));
}

namespace {

void apply_activation(Activation a, Eigen::MatrixXd& z) {
    switch (a) {
    case Activation::Elu: z = z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); }); break;
    case Activation::Sigmoid: z = z.unaryExpr([](double v) { return sigmoid(v); }); break;
    case Activation::Identity: break;
    }
}

Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z) {
    return z.unaryExpr([a](double v) { return activation_derivative(a, v); });
}

}  // namespace

// ---------------------------------------------------------------------------
// MlpModel

MlpModel::MlpModel(std::size_t input_dim, std::vector<DenseLayer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
    if (input_dim_ == 0) throw UsageError("input dimension must be at least 1");
    if (layers_.empty()) throw UsageError("model needs at least one layer");
    std::size_t prev = input_dim_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.inputs() != prev) {
            throw UsageError(fmt::format("layer {} expects {} inputs but receives {}", l, layer.inputs(), prev));
        }
        if (static_cast<std::size_t>(layer.bias.size()) != layer.outputs() || layer.outputs() == 0) {
            throw UsageError(fmt::format("layer {} bias length does not match its width", l));
        }
        if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
            throw NumericError(fmt::format("layer {} has non-finite parameters", l));
        }
        prev = layer.outputs();
    }
    if (layers_.back().outputs() != 1 || layers_.back().activation != Activation::Sigmoid) {
        throw UsageError("final layer must be a single sigmoid neuron");
    }
}

void MlpModel::check_input(std::span<const double> x) const {
    if (x.size() != input_dim_) {
        throw UsageError(fmt::format("model expects {} inputs, got {}", input_dim_, x.size()));
    }
}

MlpModel::Output MlpModel::forward(std::span<const double> x) const {
    check_input(x);
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        Eigen::VectorXd z = layers_[l].weights * a + layers_[l].bias;
        if (!z.allFinite()) throw NumericError(fmt::format("non-finite pre-activation in layer {}", l));
        a = z.unaryExpr([act = layers_[l].activation](double v) { return activate(act, v); });
    }
    const auto& out = layers_.back();
    const double f = out.weights.row(0).dot(a) + out.bias(0);
    if (!std::isfinite(f)) throw NumericError(fmt::format("non-finite pre-activation in layer {}", layers_.size() - 1));
    return {sigmoid(f), f};
}

double MlpModel::pre_activation(std::span<const double> x, NeuronRef neuron) const {
    check_input(x);
    if (neuron.layer >= layers_.size() || neuron.index >= layers_[neuron.layer].outputs()) {
        throw UsageError(fmt::format("no neuron {} in layer {}", neuron.index, neuron.layer));
    }
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l < neuron.layer; ++l) {
        Eigen::VectorXd z = layers_[l].weights * a + layers_[l].bias;
        a = z.unaryExpr([act = layers_[l].activation](double v) { return activate(act, v); });
    }
    const auto& layer = layers_[neuron.layer];
    return layer.weights.row(static_cast<Eigen::Index>(neuron.index)).dot(a) +
           layer.bias(static_cast<Eigen::Index>(neuron.index));
}

std::vector<double> MlpModel::pre_activation_gradient(std::span<const double> x, NeuronRef neuron) const {
    check_input(x);
    Matrix m(1, static_cast<Eigen::Index>(x.size()));
    std::copy(x.begin(), x.end(), m.data());
    const Matrix g = gradient_batch(m, neuron);
    return {g.data(), g.data() + g.size()};
}

std::vector<double> MlpModel::input_gradient(std::span<const double> x) const {
    return pre_activation_gradient(x, output_neuron());
}

std::vector<double> MlpModel::probability_gradient(std::span<const double> x) const {
    const double f = forward(x).latent;
    const double s = sigmoid(f);
    auto g = input_gradient(x);
    for (double& v : g) v *= s * (1.0 - s);
    return g;
}

Vector MlpModel::latent_batch(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != input_dim_) {
        throw UsageError(fmt::format("model expects {} inputs, got {}", input_dim_, x.cols()));
    }
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = (a * layers_[l].weights.transpose()).rowwise() + layers_[l].bias.transpose();
        if (!z.allFinite()) throw NumericError(fmt::format("non-finite pre-activation in layer {}", l));
        if (l + 1 == layers_.size()) return z.col(0);
        apply_activation(layers_[l].activation, z);
        a = std::move(z);
    }
    return {};
}

Matrix MlpModel::gradient_batch(const Matrix& x, std::optional<NeuronRef> neuron) const {
    const NeuronRef ref = neuron.value_or(output_neuron());
    if (static_cast<std::size_t>(x.cols()) != input_dim_) {
        throw UsageError(fmt::format("model expects {} inputs, got {}", input_dim_, x.cols()));
    }
    if (ref.layer >= layers_.size() || ref.index >= layers_[ref.layer].outputs()) {
        throw UsageError(fmt::format("no neuron {} in layer {}", ref.index, ref.layer));
    }
    std::vector<Eigen::MatrixXd> pre(ref.layer);
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < ref.layer; ++l) {
        pre[l] = (a * layers_[l].weights.transpose()).rowwise() + layers_[l].bias.transpose();
        if (!pre[l].allFinite()) throw NumericError(fmt::format("non-finite pre-activation in layer {}", l));
        a = pre[l];
        apply_activation(layers_[l].activation, a);
    }
    // Seed with d z_ref / d a_{ref-1} = row `index` of the selected layer's weights.
    Eigen::MatrixXd g = layers_[ref.layer].weights.row(static_cast<Eigen::Index>(ref.index)).replicate(x.rows(), 1);
    for (std::size_t l = ref.layer; l-- > 0;) {
        g = (g.array() * activation_derivative(layers_[l].activation, pre[l]).array()).matrix() * layers_[l].weights;
    }
    if (!g.allFinite()) throw NumericError("non-finite input gradient");
    return g;
}

MlpModel MlpModel::scaled_latent(double c) const {
    auto layers = layers_;
    layers.back().weights *= c;
    layers.back().bias *= c;
    return {input_dim_, std::move(layers)};
}

std::size_t MlpModel::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

MlpModel init_model(std::size_t input_dim, std::span<const std::size_t> hidden, Seed seed) {
    if (input_dim == 0) throw UsageError("input dimension must be at least 1");
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    std::size_t fan_in = input_dim;
    auto make = [&](std::size_t width, Activation act) {
        if (width == 0) throw UsageError("hidden widths must be at least 1");
        std::uniform_real_distribution<double> u(-std::sqrt(3.0 / static_cast<double>(fan_in)),
                                                 std::sqrt(3.0 / static_cast<double>(fan_in)));
        DenseLayer layer;
        layer.weights.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(fan_in));
        // Fill row by row so the draw order is independent of Eigen's storage order.
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = u(rng);
        layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
        layer.activation = act;
        layers.push_back(std::move(layer));
        fan_in = width;
    };
    for (std::size_t w : hidden) make(w, Activation::Elu);
    make(1, Activation::Sigmoid);
    return {input_dim, std::move(layers)};
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError(fmt::format("dropout {} outside [0, 1)", dropout));
    if (batch_size == 0) throw UsageError("batch size must be at least 1");
    if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
    if (!(l2 >= 0.0)) throw UsageError("L2 penalty must be non-negative");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw UsageError("decay factor must be in (0, 1]");
    for (auto w : hidden) {
        if (w == 0) throw UsageError("hidden widths must be at least 1");
    }
}

TrainConfig TrainConfig::full_scale() {
    TrainConfig cfg;
    cfg.hidden = {1000, 1000};
    return cfg;
}

namespace {

// Numerically stable binary cross-entropy from the logit.
double bce_from_logit(double f, int y) {
    return std::max(f, 0.0) - f * static_cast<double>(y) + std::log1p(std::exp(-std::abs(f)));
}

double hidden_penalty(const std::vector<DenseLayer>& layers) {
    double s = 0.0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) s += layers[l].weights.squaredNorm() + layers[l].bias.squaredNorm();
    return s;
}

struct AdamState {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
};

}  // namespace

Evaluation evaluate(const MlpModel& model, const Dataset& ds) {
    const Vector f = model.latent_batch(ds.X);
    Evaluation e;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double fi = f(static_cast<Eigen::Index>(i));
        e.loss += bce_from_logit(fi, ds.y[i]);
        if ((fi > 0.0 ? 1 : 0) == ds.y[i]) ++correct;
    }
    e.loss /= static_cast<double>(ds.size());
    e.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    return e;
}

TrainResult train(const MlpModel& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.size() == 0 || val_set.size() == 0) throw UsageError("training and validation sets must be nonempty");
    if (train_set.features() != model.input_dim() || val_set.features() != model.input_dim()) {
        throw UsageError(fmt::format("model expects {} features", model.input_dim()));
    }
    TrainResult result{model, {}, 0};
    if (cfg.max_epochs == 0) return result;

    std::vector<DenseLayer> layers = model.layers();
    const std::size_t depth = layers.size();
    AdamState adam;
    for (const auto& l : layers) {
        adam.mw.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        adam.vw.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        adam.mb.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        adam.vb.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = train_set.size();
    const Eigen::Index dims = train_set.X.cols();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    double lr = cfg.learning_rate;
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_improvement = 0;
    std::size_t since_decay = 0;
    std::uint64_t step = 0;
    const double keep = 1.0 - cfg.dropout;

    std::vector<Eigen::MatrixXd> pre(depth);   // pre-activations
    std::vector<Eigen::MatrixXd> act(depth);   // post-activation (after dropout) inputs to the next layer
    std::vector<Eigen::MatrixXd> mask(depth);  // inverted-dropout masks

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - start);
            Eigen::MatrixXd xb(static_cast<Eigen::Index>(count), dims);
            Eigen::VectorXd yb(static_cast<Eigen::Index>(count));
            for (std::size_t k = 0; k < count; ++k) {
                xb.row(static_cast<Eigen::Index>(k)) = train_set.X.row(static_cast<Eigen::Index>(order[start + k]));
                yb(static_cast<Eigen::Index>(k)) = train_set.y[order[start + k]];
            }

            // Forward.
            const Eigen::MatrixXd* input = &xb;
            for (std::size_t l = 0; l < depth; ++l) {
                pre[l] = ((*input) * layers[l].weights.transpose()).rowwise() + layers[l].bias.transpose();
                if (l + 1 == depth) break;
                act[l] = pre[l];
                apply_activation(layers[l].activation, act[l]);
                if (cfg.dropout > 0.0) {
                    mask[l] = Eigen::MatrixXd::NullaryExpr(act[l].rows(), act[l].cols(),
                                                           [&]() { return unit(rng) < keep ? 1.0 / keep : 0.0; });
                    act[l].array() *= mask[l].array();
                }
                input = &act[l];
            }
            const Eigen::VectorXd f = pre[depth - 1].col(0);

            double batch_loss = 0.0;
            Eigen::MatrixXd delta(static_cast<Eigen::Index>(count), 1);
            for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(count); ++k) {
                const int y = static_cast<int>(yb(k));
                batch_loss += bce_from_logit(f(k), y);
                delta(k, 0) = (sigmoid(f(k)) - yb(k)) / static_cast<double>(count);
            }
            batch_loss = batch_loss / static_cast<double>(count) + cfg.l2 * hidden_penalty(layers);
            if (!std::isfinite(batch_loss)) {
                throw TrainingError(fmt::format("training diverged: non-finite loss in epoch {}", epoch), epoch);
            }
            loss_sum += batch_loss;
            ++batches;

            // Backward and Adam update, output layer first.
            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t l = depth; l-- > 0;) {
                const Eigen::MatrixXd& in = l == 0 ? xb : act[l - 1];
                Eigen::MatrixXd gw = delta.transpose() * in;
                Eigen::VectorXd gb = delta.colwise().sum().transpose();
                if (l + 1 < depth && cfg.l2 > 0.0) {
                    gw += 2.0 * cfg.l2 * layers[l].weights;
                    gb += 2.0 * cfg.l2 * layers[l].bias;
                }
                if (l > 0) {
                    Eigen::MatrixXd back = delta * layers[l].weights;
                    if (cfg.dropout > 0.0) back.array() *= mask[l - 1].array();
                    delta = (back.array() * activation_derivative(layers[l - 1].activation, pre[l - 1]).array()).matrix();
                }
                adam.mw[l] = cfg.beta1 * adam.mw[l] + (1.0 - cfg.beta1) * gw;
                adam.vw[l] = cfg.beta2 * adam.vw[l] + (1.0 - cfg.beta2) * gw.cwiseAbs2();
                adam.mb[l] = cfg.beta1 * adam.mb[l] + (1.0 - cfg.beta1) * gb;
                adam.vb[l] = cfg.beta2 * adam.vb[l] + (1.0 - cfg.beta2) * gb.cwiseAbs2();
                layers[l].weights.array() -=
                    lr * (adam.mw[l].array() / bc1) / ((adam.vw[l].array() / bc2).sqrt() + cfg.epsilon);
                layers[l].bias.array() -=
                    lr * (adam.mb[l].array() / bc1) / ((adam.vb[l].array() / bc2).sqrt() + cfg.epsilon);
            }
        }

        MlpModel current(model.input_dim(), layers);
        const Evaluation val = evaluate(current, val_set);
        const double val_loss = val.loss + cfg.l2 * hidden_penalty(layers);
        if (!std::isfinite(val_loss)) {
            throw TrainingError(fmt::format("training diverged: non-finite validation loss in epoch {}", epoch), epoch);
        }
        result.history.push_back({epoch, loss_sum / static_cast<double>(batches), val_loss, val.accuracy, lr});

        if (val_loss < best - cfg.min_delta) {
            best = val_loss;
            result.model = std::move(current);
            result.best_epoch = epoch;
            since_improvement = 0;
            since_decay = 0;
        } else {
            ++since_improvement;
            ++since_decay;
            if (since_improvement >= cfg.stop_patience) break;
            if (since_decay >= cfg.decay_patience) {
                lr *= cfg.decay_factor;
                since_decay = 0;
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {
constexpr const char* kFormatName = "symgrad-mlp";
constexpr int kFormatVersion = 1;
}  // namespace

std::string serialize_model(const MlpModel& model) {
    nlohmann::ordered_json j;
    j["format"] = kFormatName;
    j["version"] = kFormatVersion;
    j["input_dim"] = model.input_dim();
    auto layers = nlohmann::ordered_json::array();
    for (const auto& l : model.layers()) {
        nlohmann::ordered_json lj;
        lj["rows"] = l.outputs();
        lj["cols"] = l.inputs();
        lj["activation"] = activation_name(l.activation);
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
        lj["weights"] = std::move(w);
        lj["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    return j.dump(1) + "\n";
}

MlpModel deserialize_model(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed model checkpoint: {}", e.what()));
    }
    try {
        if (j.at("format").get<std::string>() != kFormatName) throw DataError("not a symgrad model checkpoint");
        if (j.at("version").get<int>() != kFormatVersion) {
            throw DataError(fmt::format("unsupported checkpoint version {}", j.at("version").get<int>()));
        }
        const auto input_dim = j.at("input_dim").get<std::size_t>();
        std::vector<DenseLayer> layers;
        for (const auto& lj : j.at("layers")) {
            const auto rows = lj.at("rows").get<Eigen::Index>();
            const auto cols = lj.at("cols").get<Eigen::Index>();
            const auto w = lj.at("weights").get<std::vector<double>>();
            const auto b = lj.at("bias").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
                throw DataError("checkpoint layer sizes are inconsistent");
            }
            DenseLayer layer;
            layer.weights.resize(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
            layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
            layer.activation = parse_activation(lj.at("activation").get<std::string>());
            layers.push_back(std::move(layer));
        }
        return {input_dim, std::move(layers)};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed model checkpoint: {}", e.what()));
    } catch (const UsageError& e) {
        throw DataError(fmt::format("invalid model checkpoint: {}", e.what()));
    }
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    out << serialize_model(model);
    if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

MlpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

std::string model_hash(const MlpModel& model) { return sha256_hex(serialize_model(model)); }

void write_history(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    out << "epoch,train_loss,val_loss,val_acc,lr\n";
    for (const auto& r : history) {
        out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.epoch, r.train_loss, r.val_loss, r.val_acc, r.lr);
    }
    if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

}  // namespace symgrad
