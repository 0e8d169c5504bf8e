#include <numeric>
#include <random>

#include <benchmark/benchmark.h>

#include "symgrad/dataset.hpp"
#include "symgrad/gradients.hpp"
#include "symgrad/neuralnet.hpp"
#include "symgrad/symclass.hpp"
#include "symgrad/symsearch.hpp"

using namespace symgrad;

namespace {

const Dataset& experiment3() {
    static const Dataset ds = generate_experiment({3, 2000, 1, 0.01, std::nullopt});
    return ds;
}

GradientSet analytic_gradients() {
    const auto& ds = experiment3();
    const auto g = decision_formula(3).form;
    GradientSet gs;
    gs.X = ds.X;
    gs.G = Matrix(ds.X.rows(), ds.X.cols());
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        const auto r = g.grad(row_span(ds.X, i));
        for (Eigen::Index j = 0; j < ds.X.cols(); ++j) gs.G(i, j) = r.gradient[static_cast<std::size_t>(j)];
    }
    normalize_rows(gs.G);
    return gs;
}

}  // namespace

static void BM_TreeGradient(benchmark::State& state) {
    const auto t = parse("x1*x1 + sin(x2 + x3) * exp(0.5 * x1) / (1.5 + x3*x3)");
    const std::vector<double> x{0.3, -0.7, 1.1};
    for (auto _ : state) benchmark::DoNotOptimize(t.grad(x));
}
BENCHMARK(BM_TreeGradient);

static void BM_BatchEvaluate(benchmark::State& state) {
    const auto& ds = experiment3();
    const auto t = parse("x1*x1 + sin(x2 + x3) * exp(0.5 * x1) / (1.5 + x3*x3)");
    std::vector<std::size_t> rows(static_cast<std::size_t>(state.range(0)));
    std::iota(rows.begin(), rows.end(), 0);
    BatchEvaluator be;
    for (auto _ : state) {
        be.evaluate(t, ds.X, rows);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchEvaluate)->Arg(25)->Arg(2000);

static void BM_Fitness(benchmark::State& state) {
    const auto gs = analytic_gradients();
    const auto t = parse("x1*x1 + sin(x2 + x3)");
    std::vector<std::size_t> rows(static_cast<std::size_t>(state.range(0)));
    std::iota(rows.begin(), rows.end(), 0);
    for (auto _ : state) benchmark::DoNotOptimize(fitness(t, gs, rows));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Fitness)->Arg(25)->Arg(2000);

static void BM_NetworkGradientBatch(benchmark::State& state) {
    const auto& ds = experiment3();
    const std::vector<std::size_t> hidden{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0))};
    const auto m = init_model(3, hidden, 1);
    for (auto _ : state) benchmark::DoNotOptimize(m.gradient_batch(ds.X));
    state.SetItemsProcessed(state.iterations() * ds.X.rows());
}
BENCHMARK(BM_NetworkGradientBatch)->Arg(128)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_OptimizeConstants(benchmark::State& state) {
    const auto gs = analytic_gradients();
    const auto t = parse("0.8*x1*x1 + sin(1.2*x2 + x3)");
    std::vector<std::size_t> rows(200);
    std::iota(rows.begin(), rows.end(), 0);
    for (auto _ : state) benchmark::DoNotOptimize(optimize_constants(t, gs, rows, OptimizerSettings{100, 0.1}));
}
BENCHMARK(BM_OptimizeConstants)->Unit(benchmark::kMillisecond);

static void BM_SearchIteration(benchmark::State& state) {
    const auto gs = analytic_gradients();
    SearchConfig cfg;
    cfg.iterations = 1;
    cfg.seed = 1;
    for (auto _ : state) benchmark::DoNotOptimize(search(gs, cfg));
}
BENCHMARK(BM_SearchIteration)->Unit(benchmark::kMillisecond);

static void BM_HingeLoss(benchmark::State& state) {
    const auto hd = HingeDataset::from_dataset(experiment3());
    const auto t = parse("x1*x1 + sin(x2 + x3) - 1");
    std::vector<std::size_t> rows(hd.size());
    std::iota(rows.begin(), rows.end(), 0);
    for (auto _ : state) benchmark::DoNotOptimize(hinge_loss(t, hd, rows));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows.size()));
}
BENCHMARK(BM_HingeLoss);
BENCHMARK_MAIN();
