#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "symgrad/equivalence.hpp"
#include "symgrad/errors.hpp"
#include "symgrad/gradients.hpp"

using namespace symgrad;

namespace {

Matrix uniform_probes(std::mt19937_64& rng, std::size_t n, std::size_t d, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = u(rng);
    return p;
}

std::shared_ptr<const ScalarField> tree_field(const std::string& text) {
    return std::make_shared<TreeField>(parse(text));
}

// Value drawn independently of the point: a hash of its coordinates.
class NoiseField final : public ScalarField {
public:
    explicit NoiseField(std::size_t d) : d_(d) {}
    [[nodiscard]] std::size_t dims() const noexcept override { return d_; }
    [[nodiscard]] double value(std::span<const double> x) const override {
        std::uint64_t h = 1469598103934665603ull;
        for (double v : x) h = (h ^ std::hash<double>{}(v)) * 1099511628211ull;
        std::mt19937_64 rng(h);
        return std::normal_distribution<double>(0.0, 1.0)(rng);
    }
    void gradient(std::span<const double>, std::span<double> out) const override { std::fill(out.begin(), out.end(), 0.0); }
    [[nodiscard]] std::string name() const override { return "noise"; }

private:
    std::size_t d_;
};

}  // namespace

TEST_CASE("property: alignment is invariant under strictly increasing reparameterization") {
    std::mt19937_64 rng(1);
    const std::vector<std::string> gs{"x1*x1 + 2*x2*x2", "x1*x1 + x2*x3", "x1*x1 + sin(x2 + x3)"};
    for (const auto& text : gs) {
        const auto g = tree_field(text);
        const std::size_t d = g->dims();
        const auto probes = uniform_probes(rng, 500, d, -1.5, 1.5);
        const ComposedField cubic(g, [](double u) { return u + u * u * u; }, [](double u) { return 1.0 + 3.0 * u * u; }, "u+u^3");
        const ComposedField expo(g, [](double u) { return std::exp(u); }, [](double u) { return std::exp(u); }, "exp");
        const ComposedField affine(g, [](double u) { return 5.0 * u + 2.0; }, [](double) { return 5.0; }, "5u+2");
        for (const ScalarField* phi : {static_cast<const ScalarField*>(&cubic), static_cast<const ScalarField*>(&expo),
                                       static_cast<const ScalarField*>(&affine)}) {
            const auto r = gradient_alignment(*g, *phi, probes);
            CHECK_MESSAGE(r.min > 1.0 - 1e-10, text << " under " << phi->name());
            CHECK(r.fraction_above == 1.0);
        }
    }
}

TEST_CASE("alignment examples, symmetry and transitivity") {
    std::mt19937_64 rng(2);
    const auto g = tree_field("x1*x1 + 2*x2*x2");
    const auto probes = uniform_probes(rng, 300, 2, 0.1, 1.5);
    const TreeField neg(parse("0 - (x1*x1 + 2*x2*x2)"));
    CHECK(gradient_alignment(*g, neg, probes).mean == doctest::Approx(-1.0));

    const TreeField near(parse("x1*x1 + 2.01*x2*x2"));
    const TreeField nearer(parse("x1*x1 + 2.02*x2*x2"));
    const auto ab = gradient_alignment(*g, near, probes);
    const auto ba = gradient_alignment(near, *g, probes);
    CHECK(ab.cosines == ba.cosines);
    CHECK(ab.mean == ba.mean);
    const auto bc = gradient_alignment(near, nearer, probes);
    const auto ac = gradient_alignment(*g, nearer, probes);
    const double eps = std::max(1.0 - ab.min, 1.0 - bc.min);
    CHECK(ac.min > 1.0 - 4.0 * eps);

    // Zero-gradient conventions.
    const TreeField flat(parse("3"), 2);
    Matrix one(1, 2);
    one << 0.5, 0.5;
    CHECK(gradient_alignment(flat, flat, one).mean == 1.0);
    CHECK(gradient_alignment(flat, *g, one).mean == 0.0);
}

TEST_CASE("non-finite gradients are reported with their probes") {
    const TreeField singular(parse("1 / x1"));
    const TreeField smooth(parse("x1"));
    Matrix probes(3, 1);
    probes << 1.0, 0.0, 2.0;
    try {
        (void)gradient_alignment(singular, smooth, probes);
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
    Matrix wrong(3, 2);
    wrong.setOnes();
    CHECK_THROWS_AS((void)gradient_alignment(smooth, TreeField(parse("x1")), wrong), UsageError);
}

TEST_CASE("spearman agrees with the quadratic-time oracle") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> small(0, 9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(60), b(60);
        for (auto& v : a) v = small(rng);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = a[i] + small(rng);
        CHECK(spearman(a, b) == doctest::Approx(oracle::spearman_naive(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("link report examples") {
    std::mt19937_64 rng(5);
    const auto g = tree_field("x1*x1 + 2*x2*x2");
    const ComposedField f(g, [](double u) { return std::exp(u); }, [](double u) { return std::exp(u); }, "exp");
    const auto probes = uniform_probes(rng, 1000, 2, -1.5, 1.5);
    const auto r = link_report(f, *g, probes);
    CHECK(r.spearman == doctest::Approx(1.0));
    CHECK(r.inversions == 0);
    CHECK(r.direction == LinkDirection::Increasing);
    REQUIRE(r.pairs.size() == 1000);
    for (std::size_t i = 1; i < r.pairs.size(); ++i) CHECK(r.pairs[i - 1].first <= r.pairs[i].first);

    const TreeField neg(parse("0 - x1*x1 - 2*x2*x2"));
    CHECK(link_report(neg, *g, probes).direction == LinkDirection::Decreasing);

    const NoiseField noise(2);
    const auto n = link_report(noise, *g, probes);
    CHECK(std::abs(n.spearman) < 0.2);
    CHECK(n.direction == LinkDirection::Undetermined);

    CHECK_THROWS_AS((void)link_report(f, *g, probes.topRows(9)), UsageError);
    const TreeField constant(parse("2"), 2);
    CHECK_THROWS_AS((void)link_report(f, constant, probes), DegenerateInputError);

    const auto dir = std::filesystem::temp_directory_path() / "symgrad_test_link";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    write_link_report(r, dir / "link.csv");
    std::ifstream in(dir / "link.meta");
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find("spearman=") != std::string::npos);
    CHECK(summarize(r).find("increasing") != std::string::npos);
}

TEST_CASE("trained experiment 1 network is equivalent to its decision function") {
    const auto t = fixture::trained_experiment(1, 2000, 1);
    const auto gs = extract(t.model, t.val, {});
    const ModelField f(t.model);
    const TreeField g(parse("x1*x1 + 2*x2*x2"));
    CHECK(gradient_alignment(g, f, gs.X).mean >= 0.95);
    const auto link = link_report(f, g, gs.X);
    CHECK(link.spearman >= 0.99);
    CHECK(link.direction == LinkDirection::Increasing);
}
