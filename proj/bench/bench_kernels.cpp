// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include "reserve_mdn/forecast.hpp"
#include "reserve_mdn/kernels.hpp"
#include "reserve_mdn/loss.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace rmdn;

namespace {

struct LossFixture {
    LossContext ctx;
    NetworkWeights w;
    Batch batch;
    TermWeights tw;

    explicit LossFixture(int n) {
        ctx.config.neurons = 60;
        ctx.config.layers = 2;
        ctx.config.components = 2;
        ctx.config.mse_weight = 3.0;
        ctx.n = n;
        Rng rng(1);
        std::uniform_real_distribution<double> u(100.0, 1000.0);
        IncrementalTriangle tri(n);
        for (const auto c : upper_cells(n)) tri.set(c, u(rng));
        const auto cells = upper_cells(n);
        ctx.normalizer = fit_normalizer(tri.values(cells), ScaleKind::raw);
        batch = make_batch(tri, cells, ctx.normalizer);
        w = init_glorot(ctx.config, 2);
        tw = training_weights(ctx, batch);
    }
};

void accumulate(benchmark::State& state, kernels::Exec exec) {
    LossFixture f(static_cast<int>(state.range(0)));
    std::vector<double> grad;
    kernels::Workspace ws;
    for (auto _ : state) {
        auto r = kernels::accumulate(f.ctx, f.w, f.batch, f.tw, nullptr, &grad, exec, &ws);
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(f.batch.rows()));
}

void reserves(benchmark::State& state, kernels::Exec exec) {
    const int n = 40;
    std::vector<CellDistribution> cells;
    for (const auto c : lower_cells(n)) {
        CellDistribution d;
        d.gauss.alpha = {0.6, 0.4};
        d.gauss.mu = {100.0 * c.i, 50.0 * c.j};
        d.gauss.sigma = {10.0, 20.0};
        cells.push_back(d);
    }
    const auto nsim = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto r = simulate_reserves(cells, nsim, 3, exec);
        benchmark::DoNotOptimize(r.mean);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(nsim));
}

}  // namespace

BENCHMARK_CAPTURE(accumulate, serial, kernels::Exec::serial)->Arg(20)->Arg(40);
BENCHMARK_CAPTURE(accumulate, parallel, kernels::Exec::parallel)->Arg(20)->Arg(40);
BENCHMARK_CAPTURE(reserves, serial, kernels::Exec::serial)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(reserves, parallel, kernels::Exec::parallel)->Arg(100000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
