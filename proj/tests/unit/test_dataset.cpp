#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "symgrad/dataset.hpp"
#include "symgrad/errors.hpp"

using namespace symgrad;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("symgrad_test_dataset_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Independent closed forms of the decision functions.
double reference_g(int id, std::span<const double> x) {
    switch (id) {
    case 1: return x[0] * x[0] + 2 * x[1] * x[1];
    case 2: return x[0] * x[0] + 3 * x[0] * x[1] + 2 * x[1] * x[1];
    case 3: return x[0] * x[0] + std::sin(x[1] + x[2]);
    case 4: return std::exp(x[0] - x[1]) - std::numbers::pi * x[2];
    case 5: return x[0] * std::exp(-0.5 * (x[1] * x[1] + x[2] * x[2]));
    case 6: {
        const double d = (x[2] - x[3]) * (x[2] - x[3]) + (x[4] - x[5]) * (x[4] - x[5]);
        return x[0] * x[1] / d;
    }
    default: return x[0] * x[1] + x[2] * x[3];
    }
}

}  // namespace

TEST_CASE("eval_decision examples") {
    const auto f1 = decision_formula(1);
    CHECK(eval_decision(f1, std::vector<double>{1.5, 0.0}) == doctest::Approx(2.25));
    CHECK(eval_decision(f1, std::vector<double>{0.0, 0.0}) == 0.0);
    const auto f3 = decision_formula(3);
    const double q = std::numbers::pi / 4;
    CHECK(eval_decision(f3, std::vector<double>{1.0, q, q}) == doctest::Approx(2.0));
    CHECK_THROWS_AS((void)eval_decision(f1, std::vector<double>{1.0}), UsageError);
    // Experiment 6 is singular where both differences vanish.
    CHECK_THROWS_AS((void)eval_decision(decision_formula(6), std::vector<double>{1, 1, 0, 0, 0, 0}), DomainError);
    CHECK_THROWS_AS((void)decision_formula(8), UsageError);
}

TEST_CASE("decision formulas agree with the closed forms") {
    std::mt19937_64 rng(1);
    for (int id = 1; id <= kExperimentCount; ++id) {
        const auto f = decision_formula(id);
        const auto dom = default_domain(id);
        REQUIRE(dom.dims() == f.arity);
        for (int k = 0; k < 100; ++k) {
            std::vector<double> x;
            for (const auto& iv : dom.box) x.push_back(std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng));
            if (id == 6 && std::abs(reference_g(6, x)) > 1e6) continue;
            CHECK(eval_decision(f, x) == doctest::Approx(reference_g(id, x)).epsilon(1e-12));
        }
    }
    CHECK(decision_formula(1).threshold == 1.0);
    CHECK(decision_formula(2).threshold == 5.0);
    CHECK(decision_formula(5).threshold == 0.2);
}

TEST_CASE("generate_experiment examples") {
    const auto ds = generate_experiment({1, 10000, 42, 0.01, std::nullopt});
    CHECK(ds.size() == 10000);
    CHECK(ds.features() == 2);
    const auto positives = std::count(ds.y.begin(), ds.y.end(), 1);
    CHECK(positives > 0);
    CHECK(positives < 10000);
    CHECK(ds.meta.n == 10000);
    CHECK(ds.meta.seed == 42);
}

TEST_CASE("property: noise-free labels match the formula") {
    for (int id = 1; id <= kExperimentCount; ++id) {
        const auto ds = generate_experiment({id, 10000, 3, 0.0, std::nullopt});
        const auto f = decision_formula(id);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto x = row_span(ds.X, static_cast<Eigen::Index>(i));
            CHECK(static_cast<int>(reference_g(id, x) > f.threshold) == ds.y[i]);
        }
    }
}

TEST_CASE("property: class balance of the default domains") {
    for (int id = 1; id <= kExperimentCount; ++id) {
        const auto ds = generate_experiment({id, 10000, 5, 0.01, std::nullopt});
        const double frac = static_cast<double>(std::count(ds.y.begin(), ds.y.end(), 1)) / 10000.0;
        CHECK_MESSAGE(frac >= 0.05, "experiment " << id);
        CHECK_MESSAGE(frac <= 0.95, "experiment " << id);
    }
}

TEST_CASE("property: experiment 7 purity") {
    const auto ds = generate_experiment({7, 5000, 9, 0.01, std::nullopt});
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto x = row_span(ds.X, static_cast<Eigen::Index>(i));
        const bool a = x[0] * x[1] > 1.0;
        const bool b = x[2] * x[3] > 1.0;
        CHECK(a == b);
        CHECK(ds.y[i] == static_cast<int>(a));
    }
}

TEST_CASE("experiment 6 avoids the singular denominator") {
    const auto ds = generate_experiment({6, 5000, 2, 0.0, std::nullopt});
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto x = row_span(ds.X, static_cast<Eigen::Index>(i));
        const double d = (x[2] - x[3]) * (x[2] - x[3]) + (x[4] - x[5]) * (x[4] - x[5]);
        CHECK(std::abs(d) >= 1e-3);
    }
}

TEST_CASE("rejection sampling gives up") {
    // A box where the experiment-7 conjunctions never agree on the positive side and
    // almost never on the negative side is still satisfiable; a box with x1*x2 > 1 and
    // x3*x4 < 1 everywhere is not.
    GenerationOptions o{7, 100, 1, 0.01, SamplingDomain::parse("1.5:2,1.5:2,0.1:0.5,0.1:0.5")};
    CHECK_THROWS_AS((void)generate_experiment(o), GenerationError);
}

TEST_CASE("property: determinism") {
    const auto a = generate_experiment({4, 500, 77, 0.01, std::nullopt});
    const auto b = generate_experiment({4, 500, 77, 0.01, std::nullopt});
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    const auto c = generate_experiment({4, 500, 78, 0.01, std::nullopt});
    CHECK_FALSE(a.X == c.X);
}

TEST_CASE("noise is multiplicative and applied after labelling") {
    const auto clean = generate_experiment({1, 2000, 8, 0.0, std::nullopt});
    const auto noisy = generate_experiment({1, 2000, 8, 0.01, std::nullopt});
    CHECK(clean.y == noisy.y);
    double sum = 0.0, sq = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < clean.X.rows(); ++i) {
        for (Eigen::Index j = 0; j < clean.X.cols(); ++j) {
            if (std::abs(clean.X(i, j)) < 0.1) continue;
            const double eps = noisy.X(i, j) / clean.X(i, j) - 1.0;
            sum += eps;
            sq += eps * eps;
            ++count;
        }
    }
    const double mean = sum / count;
    const double sd = std::sqrt(sq / count - mean * mean);
    CHECK(std::abs(mean) < 1e-3);
    CHECK(sd == doctest::Approx(0.01).epsilon(0.1));
}

TEST_CASE("split examples") {
    const auto ds = generate_experiment({1, 10000, 1, 0.01, std::nullopt});
    const auto [train, val] = split(ds, 0.8, 3);
    CHECK(train.size() == 8000);
    CHECK(val.size() == 2000);

    const auto small = generate_experiment({1, 10, 1, 0.01, std::nullopt});
    const auto [a, b] = split(small, 0.5, 4);
    CHECK(a.size() == 5);
    CHECK(b.size() == 5);
    std::multiset<std::pair<double, double>> all, parts;
    for (Eigen::Index i = 0; i < small.X.rows(); ++i) all.insert({small.X(i, 0), small.X(i, 1)});
    for (const auto* part : {&a, &b})
        for (Eigen::Index i = 0; i < part->X.rows(); ++i) parts.insert({part->X(i, 0), part->X(i, 1)});
    CHECK(all == parts);

    const auto [a2, b2] = split(small, 0.5, 4);
    CHECK(a2.X == a.X);
    CHECK(b2.X == b.X);

    CHECK_THROWS_AS((void)split(small, 0.01, 1), UsageError);
    CHECK_THROWS_AS((void)split(small, 1.0, 1), UsageError);
}

TEST_CASE("persistence round-trips and is byte-stable") {
    const auto dir = scratch_dir("io");
    const auto ds = generate_experiment({3, 300, 5, 0.01, std::nullopt});
    write_dataset(ds, dir / "a.csv");
    write_dataset(ds, dir / "b.csv");
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.csv").rfind("x1,x2,x3,label\n", 0) == 0);
    const auto meta = slurp(dir / "a.meta");
    for (const char* key : {"id=3", "seed=5", "noise=", "n=300", "domain="}) CHECK(meta.find(key) != std::string::npos);

    const auto back = read_dataset(dir / "a.csv");
    CHECK(back.X == ds.X);
    CHECK(back.y == ds.y);
    CHECK(back.meta.experiment == 3);
    CHECK(back.meta.domain.to_string() == ds.meta.domain.to_string());

    std::ofstream(dir / "bad.csv") << "x1,label\n0.5,1\nnan,0\n";
    std::ofstream(dir / "bad.meta") << "id=1\nseed=0\nnoise=0\nn=2\ndomain=0:1\n";
    CHECK_THROWS_AS((void)read_dataset(dir / "bad.csv"), DataError);
}

TEST_CASE("sampling domains") {
    const auto d = SamplingDomain::parse("-1.5:1.5,0:3.25");
    CHECK(d.dims() == 2);
    CHECK(d.box[1].hi == 3.25);
    CHECK(SamplingDomain::parse(d.to_string()).to_string() == d.to_string());
    CHECK_THROWS_AS((void)SamplingDomain::parse("1:0"), UsageError);
    CHECK_THROWS_AS((void)SamplingDomain::parse("abc"), Error);
    GenerationOptions wrong{1, 10, 1, 0.01, SamplingDomain::parse("0:1")};
    CHECK_THROWS_AS((void)generate_experiment(wrong), UsageError);
}
