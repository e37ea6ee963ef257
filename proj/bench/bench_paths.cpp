// SPDX-License-Identifier: MIT
//
// Serial reference kernels against their OpenMP counterparts on the S1 setup.
// Run with --benchmark_counters_tabular=true for a compact table.

#include <memory>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "capeq/scenario.hpp"

using namespace capeq;

namespace {

struct Setup {
    Scenario s;
    std::shared_ptr<const Equilibrium> eq;
    std::unique_ptr<ControlSolution> sol;

    Setup() : s(load_scenario(std::string(CAPEQ_CONFIG_DIR) + "/s1.json")) {
        eq = std::make_shared<const Equilibrium>(s.producers, s.market);
        sol = std::make_unique<ControlSolution>(s.producers[0], s.market, std::make_shared<EquilibriumPhi>(eq));
    }

    PayoffProblem problem(std::size_t paths, int threads) const {
        PathConfig cfg = s.simulation;
        cfg.paths = paths;
        cfg.threads = threads;
        return {s.market, cfg, sol.get(), {{"optimal", 1.0, true}, {"scaled_0.8", 0.8, true}}, sol->growth_slope()};
    }
};

const Setup& setup() {
    static const Setup instance;
    return instance;
}

void BM_PayoffRowsSerial(benchmark::State& state) {
    const auto prob = setup().problem(static_cast<std::size_t>(state.range(0)), 1);
    std::vector<double> rows(prob.cfg.paths * payoff_row_width(prob.strategies.size()));
    for (auto _ : state) {
        payoff_rows_serial(prob, rows);
        benchmark::DoNotOptimize(rows.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PayoffRowsParallel(benchmark::State& state) {
    const auto prob = setup().problem(static_cast<std::size_t>(state.range(0)), 0);
    std::vector<double> rows(prob.cfg.paths * payoff_row_width(prob.strategies.size()));
    for (auto _ : state) {
        payoff_rows_parallel(prob, rows);
        benchmark::DoNotOptimize(rows.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
    state.counters["threads"] = omp_get_max_threads();
}

// range(1) is the thread count; 0 means the OpenMP default.
void BM_SimulatePaths(benchmark::State& state) {
    PathConfig cfg = setup().s.simulation;
    cfg.paths = static_cast<std::size_t>(state.range(0));
    cfg.threads = static_cast<int>(state.range(1));
    for (auto _ : state) {
        auto bundle = simulate_gbm_with_max(setup().s.market, cfg);
        benchmark::DoNotOptimize(bundle.paths.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_PayoffRowsSerial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PayoffRowsParallel)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulatePaths)->Args({1000, 1})->Args({1000, 0})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
