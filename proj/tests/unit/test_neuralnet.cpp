#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "symgrad/dataset.hpp"
#include "symgrad/errors.hpp"
#include "symgrad/neuralnet.hpp"

using namespace symgrad;

namespace {

MlpModel linear_model(std::vector<double> w, double b) {
    DenseLayer out;
    out.weights = Eigen::Map<Eigen::RowVectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    out.bias = Eigen::VectorXd::Constant(1, b);
    out.activation = Activation::Sigmoid;
    return MlpModel(w.size(), {out});
}

// Random deep ELU network with unit-scale weights.
MlpModel random_deep_model(std::mt19937_64& rng, std::size_t input_dim) {
    const std::vector<std::size_t> hidden{16, 16, 8};
    MlpModel m = init_model(input_dim, hidden, rng());
    std::vector<DenseLayer> layers = m.layers();
    std::normal_distribution<double> n(0.0, 0.3);
    for (auto& l : layers) l.bias = l.bias.unaryExpr([&](double) { return n(rng); });
    return MlpModel(input_dim, layers);
}

double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Dataset toy_linear(std::size_t n, Seed seed) {
    auto ds = generate_experiment({1, n, seed, 0.0, std::nullopt});
    for (std::size_t i = 0; i < ds.size(); ++i) ds.y[i] = ds.X(static_cast<Eigen::Index>(i), 0) > 0.0 ? 1 : 0;
    return ds;
}

}  // namespace

TEST_CASE("ELU values and continuity of the derivative") {
    CHECK(activate(Activation::Elu, 2.0) == 2.0);
    CHECK(activate(Activation::Elu, -1.0) == doctest::Approx(std::exp(-1.0) - 1.0));
    CHECK(std::abs(activation_derivative(Activation::Elu, -1e-9) - activation_derivative(Activation::Elu, 1e-9)) < 1e-8);
    CHECK(activation_derivative(Activation::Elu, 0.0) == doctest::Approx(1.0));
    CHECK(parse_activation("elu") == Activation::Elu);
    CHECK_THROWS_AS((void)parse_activation("relu"), Error);
}

TEST_CASE("init_model shapes and determinism") {
    const std::vector<std::size_t> desk{128, 128};
    const auto m = init_model(2, desk, 1);
    REQUIRE(m.layers().size() == 3);
    CHECK(m.layers()[0].weights.rows() == 128);
    CHECK(m.layers()[0].weights.cols() == 2);
    CHECK(m.layers()[1].weights.rows() == 128);
    CHECK(m.layers()[1].weights.cols() == 128);
    CHECK(m.layers()[2].weights.rows() == 1);
    CHECK(m.layers()[2].weights.cols() == 128);
    CHECK(m.layers()[2].activation == Activation::Sigmoid);
    CHECK(m.layers()[0].bias.isZero());
    const double bound = std::sqrt(3.0 / 2.0);
    CHECK(m.layers()[0].weights.cwiseAbs().maxCoeff() <= bound);

    const auto again = init_model(2, desk, 1);
    CHECK(serialize_model(m) == serialize_model(again));
    CHECK(serialize_model(m) != serialize_model(init_model(2, desk, 2)));

    const auto full = TrainConfig::full_scale();
    const auto big = init_model(6, full.hidden, 3);
    CHECK(big.layers()[0].weights.rows() == 1000);
    CHECK(big.layers()[0].weights.cols() == 6);
    CHECK(big.layers()[1].weights.rows() == 1000);
    CHECK(big.layers()[2].weights.cols() == 1000);
}

TEST_CASE("model invariants are enforced") {
    DenseLayer hidden{Eigen::MatrixXd::Ones(3, 2), Eigen::VectorXd::Zero(3), Activation::Elu};
    DenseLayer wrong_width{Eigen::MatrixXd::Ones(2, 3), Eigen::VectorXd::Zero(2), Activation::Sigmoid};
    CHECK_THROWS_AS(MlpModel(2, {hidden, wrong_width}), UsageError);
    DenseLayer not_sigmoid{Eigen::MatrixXd::Ones(1, 3), Eigen::VectorXd::Zero(1), Activation::Identity};
    CHECK_THROWS_AS(MlpModel(2, {hidden, not_sigmoid}), UsageError);
    DenseLayer bad_chain{Eigen::MatrixXd::Ones(1, 4), Eigen::VectorXd::Zero(1), Activation::Sigmoid};
    CHECK_THROWS_AS(MlpModel(2, {hidden, bad_chain}), UsageError);
    DenseLayer nan_out{Eigen::MatrixXd::Constant(1, 3, std::nan("")), Eigen::VectorXd::Zero(1), Activation::Sigmoid};
    CHECK_THROWS_AS(MlpModel(2, {hidden, nan_out}), Error);
}

TEST_CASE("forward examples") {
    const auto m = linear_model({2.0, 0.0}, 0.0);
    const auto out = m.forward(std::vector<double>{1.0, 0.0});
    CHECK(out.latent == doctest::Approx(2.0));
    CHECK(out.probability == doctest::Approx(0.8807970779778823));
    CHECK(m.forward(std::vector<double>{0.0, 5.0}).probability == 0.5);
    CHECK_THROWS_AS((void)m.forward(std::vector<double>{1.0}), UsageError);

    // Huge inputs overflow the hidden layer and are reported with the layer index.
    DenseLayer h{Eigen::MatrixXd::Constant(1, 1, 1e300), Eigen::VectorXd::Zero(1), Activation::Elu};
    DenseLayer o{Eigen::MatrixXd::Constant(1, 1, 1e300), Eigen::VectorXd::Zero(1), Activation::Sigmoid};
    const MlpModel overflow(1, {h, o});
    try {
        (void)overflow.forward(std::vector<double>{1e300});
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("layer") != std::string::npos);
    }
}

TEST_CASE("property: F increases strictly with f") {
    std::mt19937_64 rng(4);
    const auto m = random_deep_model(rng, 3);
    std::vector<std::pair<double, double>> pairs;
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> x{u(rng), u(rng), u(rng)};
        const auto out = m.forward(x);
        CHECK(out.probability == doctest::Approx(sigmoid_ref(out.latent)).epsilon(1e-14));
        pairs.emplace_back(out.latent, out.probability);
    }
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t i = 1; i < pairs.size(); ++i) {
        if (pairs[i].first > pairs[i - 1].first) CHECK(pairs[i].second >= pairs[i - 1].second);
    }
}

TEST_CASE("input gradient examples") {
    const auto m = linear_model({0.7, -1.3}, 4.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 10; ++i) {
        const auto g = m.input_gradient(std::vector<double>{u(rng), u(rng)});
        CHECK(g[0] == doctest::Approx(0.7));
        CHECK(g[1] == doctest::Approx(-1.3));
    }

    std::vector<DenseLayer> layers = random_deep_model(rng, 2).layers();
    layers.back().weights.setZero();
    const MlpModel flat(2, layers);
    const auto g = flat.input_gradient(std::vector<double>{0.3, -0.4});
    CHECK(g == std::vector<double>{0.0, 0.0});
}

TEST_CASE("property: deep ELU gradients match central differences") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + trial % 6;
        const auto m = random_deep_model(rng, d);
        std::vector<double> x(d);
        for (auto& v : x) v = u(rng);
        const auto fd = oracle::central_difference([&](std::span<const double> p) { return m.latent(p); }, x, 1e-4);
        worst = std::max(worst, oracle::relative_error(m.input_gradient(x), fd));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("property: latent gradient equals probability gradient over sigmoid'(f)") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto m = random_deep_model(rng, 3);
        std::vector<double> x{u(rng), u(rng), u(rng)};
        const double f = m.latent(x);
        const double slope = sigmoid_ref(f) * (1.0 - sigmoid_ref(f));
        auto gF = m.probability_gradient(x);
        for (auto& v : gF) v /= slope;
        CHECK(oracle::relative_error(gF, m.input_gradient(x)) < 1e-8);
    }
}

TEST_CASE("batched gradients match single-point gradients and hidden neurons are reachable") {
    std::mt19937_64 rng(21);
    const auto m = random_deep_model(rng, 4);
    Matrix x(20, 4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = u(rng);
    const Matrix g = m.gradient_batch(x);
    const Vector f = m.latent_batch(x);
    const NeuronRef hidden{1, 3};
    const Matrix gh = m.gradient_batch(x, hidden);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto xi = row_span(x, i);
        CHECK(f(i) == doctest::Approx(m.latent(xi)).epsilon(1e-12));
        const auto gi = m.input_gradient(xi);
        for (Eigen::Index j = 0; j < 4; ++j) CHECK(g(i, j) == doctest::Approx(gi[static_cast<std::size_t>(j)]).epsilon(1e-12));
        const auto fd = oracle::central_difference([&](std::span<const double> p) { return m.pre_activation(p, hidden); }, xi, 1e-5);
        std::vector<double> row(gh.row(i).data(), gh.row(i).data() + 4);
        CHECK(oracle::relative_error(row, fd) < 1e-6);
    }
    CHECK_THROWS_AS((void)m.pre_activation(row_span(x, 0), NeuronRef{7, 0}), UsageError);
}

TEST_CASE("scaled latent multiplies f") {
    std::mt19937_64 rng(8);
    const auto m = random_deep_model(rng, 2);
    const auto s = m.scaled_latent(3.5);
    const std::vector<double> x{0.2, -0.9};
    CHECK(s.latent(x) == doctest::Approx(3.5 * m.latent(x)).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip") {
    std::mt19937_64 rng(6);
    const auto m = random_deep_model(rng, 3);
    const auto text = serialize_model(m);
    const auto back = deserialize_model(text);
    CHECK(serialize_model(back) == text);
    CHECK(model_hash(back) == model_hash(m));
    const std::vector<double> x{0.1, 0.2, 0.3};
    CHECK(back.latent(x) == m.latent(x));
    CHECK(text.find("\"version\": 1") != std::string::npos);

    CHECK_THROWS_AS((void)deserialize_model("{not json"), DataError);
    CHECK_THROWS_AS((void)deserialize_model(R"({"format":"symgrad-mlp","version":99})"), DataError);

    const auto dir = std::filesystem::temp_directory_path() / "symgrad_test_nn";
    std::filesystem::create_directories(dir);
    save_model(m, dir / "m.json");
    CHECK(model_hash(load_model(dir / "m.json")) == model_hash(m));
    CHECK_THROWS_AS((void)load_model(dir / "missing.json"), DataError);
}

TEST_CASE("training: zero epochs returns the initial model") {
    const auto ds = generate_experiment({1, 200, 1, 0.01, std::nullopt});
    const auto [tr, va] = split(ds, 0.8, 1);
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.max_epochs = 0;
    const auto init = init_model(2, cfg.hidden, 5);
    const auto result = train(init, tr, va, cfg);
    CHECK(result.history.empty());
    CHECK(serialize_model(result.model) == serialize_model(init));
}

TEST_CASE("training: linearly separable toy set") {
    const auto ds = toy_linear(500, 3);
    const auto [tr, va] = split(ds, 0.8, 3);
    TrainConfig cfg;
    cfg.hidden = {32, 32};
    cfg.seed = 1;
    const auto result = train(init_model(2, cfg.hidden, cfg.seed), tr, va, cfg);
    CHECK(evaluate(result.model, va).accuracy >= 0.99);
    CHECK(!result.history.empty());
    CHECK(result.best_epoch >= 1);
    CHECK(result.best_epoch <= result.history.size());
}

TEST_CASE("training: experiment 1 at desk scale") {
    const auto ds = generate_experiment({1, 2000, 1, 0.01, std::nullopt});
    const auto [tr, va] = split(ds, 0.8, 1);
    TrainConfig cfg;
    cfg.seed = 1;
    const auto result = train(init_model(2, cfg.hidden, cfg.seed), tr, va, cfg);
    const auto eval = evaluate(result.model, va);
    CHECK(eval.accuracy >= 0.98);
    // The returned model is the best-validation checkpoint, up to the improvement margin.
    const double kept = result.history[result.best_epoch - 1].val_loss;
    for (const auto& r : result.history) CHECK(r.val_loss >= kept - cfg.min_delta);
    CHECK(evaluate(result.model, va).loss <= kept);
    // The learning rate only ever halves.
    for (std::size_t i = 1; i < result.history.size(); ++i) {
        const double ratio = result.history[i].lr / result.history[i - 1].lr;
        CHECK((ratio == 1.0 || ratio == 0.5));
    }
    CHECK(result.history.size() < cfg.max_epochs);
}

TEST_CASE("property: L2 shrinks hidden weights") {
    const auto ds = generate_experiment({1, 1000, 2, 0.01, std::nullopt});
    const auto [tr, va] = split(ds, 0.8, 2);
    TrainConfig base;
    base.hidden = {32, 32};
    base.seed = 4;
    base.max_epochs = 40;
    base.decay_patience = 1000;
    base.stop_patience = 1000;
    TrainConfig reg = base;
    reg.l2 = 1e-3;
    base.l2 = 0.0;
    const auto init = init_model(2, base.hidden, base.seed);
    const auto plain = train(init, tr, va, base);
    const auto shrunk = train(init, tr, va, reg);
    for (std::size_t l = 0; l + 1 < init.layers().size(); ++l) {
        CHECK(shrunk.model.layers()[l].weights.norm() <= plain.model.layers()[l].weights.norm());
    }
}

TEST_CASE("training configuration is validated") {
    TrainConfig cfg;
    cfg.dropout = 1.0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = {};
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("divergence raises a training error with the epoch") {
    auto ds = generate_experiment({1, 200, 1, 0.0, std::nullopt});
    ds.X *= 1e300;
    const auto [tr, va] = split(ds, 0.8, 1);
    TrainConfig cfg;
    cfg.hidden = {4};
    cfg.learning_rate = 1e10;
    cfg.batch_size = 8;
    try {
        (void)train(init_model(2, cfg.hidden, 1), tr, va, cfg);
        FAIL("expected divergence");
    } catch (const TrainingError& e) {
        CHECK(e.epoch() >= 1);
    }
}
