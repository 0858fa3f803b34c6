// Serial versus OpenMP execution of the Monte Carlo and sensitivity kernels.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "pnl/readout_sim.hpp"
#include "pnl/sensitivity.hpp"

namespace {

pnl::Execution mode(const benchmark::State& state) {
    return state.range(0) == 0 ? pnl::Execution::serial : pnl::Execution::parallel;
}

void BM_SimulateExperiment(benchmark::State& state) {
    pnl::SimulationPlan plan;
    plan.shots = 2000;
    plan.m = 10000;
    for (auto _ : state) {
        auto records = pnl::simulate_experiment(plan, mode(state));
        benchmark::DoNotOptimize(records.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(plan.shots));
}

void BM_SensitivityMap(benchmark::State& state) {
    const pnl::SensitivityParams params;
    std::vector<double> taus, ms;
    for (int i = 0; i < 200; ++i)
        taus.push_back(std::pow(10.0, 5.0 * i / 199.0));
    for (int i = 0; i < 400; ++i)
        ms.push_back(std::pow(10.0, 5.7 * i / 399.0));
    for (auto _ : state) {
        auto cells = pnl::sensitivity_map(params, taus, ms, std::nullopt, mode(state));
        benchmark::DoNotOptimize(cells.data());
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(taus.size() * ms.size()));
}

}  // namespace

BENCHMARK(BM_SimulateExperiment)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SensitivityMap)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
