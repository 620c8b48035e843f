#include "nplse/dynamics.hpp"
#include "nplse/empirics.hpp"
#include "nplse/estimators.hpp"

#include <benchmark/benchmark.h>

using namespace nplse;

static void BM_SimulateRkhs(benchmark::State& state) {
  RkhsSystemOptions o;
  o.burn_in = 0;
  const SystemSpec spec = make_random_rkhs_system(3, static_cast<int>(state.range(0)), 0.9, 1, o);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(spec, 500, 2));
}
BENCHMARK(BM_SimulateRkhs)->Arg(500)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_CounterfactualStates(benchmark::State& state) {
  RkhsSystemOptions o;
  o.burn_in = 0;
  const SystemSpec spec = make_random_rkhs_system(3, 500, 0.9, 1, o);
  for (auto _ : state) benchmark::DoNotOptimize(sample_counterfactual_states(spec, 200, 200, 3));
}
BENCHMARK(BM_CounterfactualStates)->Unit(benchmark::kMillisecond);

static void BM_SigmaEstimate(benchmark::State& state) {
  RkhsSystemOptions o;
  o.burn_in = 0;
  const SystemSpec spec = make_random_rkhs_system(3, 100, 0.9, 1, o);
  const std::vector<std::pair<Function, Function>> pairs{{spec.truth, zero_function(3, 3)}};
  const int T = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(estimate_sigma_T(pairs, spec, T, 100, default_lambda_grid(2.0, T), 4, 1));
}
BENCHMARK(BM_SigmaEstimate)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
