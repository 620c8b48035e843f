#include "nplse/bounds.hpp"

#include <benchmark/benchmark.h>

using namespace nplse;

static void BM_EntropyIntegralClosedForm(benchmark::State& state) {
  const NonparametricEntropy m{2.0, 1.5};
  for (auto _ : state) benchmark::DoNotOptimize(entropy_integral(m, 0.0, 1.0));
}
BENCHMARK(BM_EntropyIntegralClosedForm);

static void BM_EntropyIntegralQuadrature(benchmark::State& state) {
  const NonparametricEntropy m{2.0, 1.5};
  for (auto _ : state) benchmark::DoNotOptimize(entropy_integral_quadrature(m, 0.0, 1.0));
}
BENCHMARK(BM_EntropyIntegralQuadrature);

static void BM_BalanceNonparametric(benchmark::State& state) {
  const EntropyModel m = NonparametricEntropy{2.0, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(balance(m, 0.1, 1024, 1, 1.0 / 1024));
}
BENCHMARK(BM_BalanceNonparametric);

static void BM_BalanceRkhs(benchmark::State& state) {
  const EntropyModel m = RkhsEntropy{5.0, 1.0, 1.0, 3.0};
  for (auto _ : state) benchmark::DoNotOptimize(balance(m, 0.1, 500, 3, 1.0 / 500));
}
BENCHMARK(BM_BalanceRkhs);
