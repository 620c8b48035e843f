#include "nplse/config.hpp"
#include "nplse/estimators.hpp"

#include <benchmark/benchmark.h>

using namespace nplse;

namespace {

SystemSpec sine_system() {
  SystemConfig c;
  c.truth.type = "sine";
  c.truth.scale = 0.7;
  c.noise_sigma = 0.1;
  return build_system(c, 0);
}

}  // namespace

static void BM_LipschitzChain(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Stream rng(1);
  Vec targets(n), weights = Vec::Ones(n), gaps(n - 1);
  for (int i = 0; i < n; ++i) targets[i] = rng.normal();
  for (int i = 0; i + 1 < n; ++i) gaps[i] = 2.0 / n;
  for (auto _ : state) benchmark::DoNotOptimize(solve_lipschitz_chain(targets, weights, gaps, -1.0, 1.0));
  state.SetComplexityN(n);
}
BENCHMARK(BM_LipschitzChain)->RangeMultiplier(4)->Range(128, 8192)->Complexity(benchmark::oNSquared);

static void BM_LipschitzLse(benchmark::State& state) {
  const Trajectory tr = simulate(sine_system(), static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(lse_lipschitz1d(tr, 1.0, -1.0, 1.0));
}
BENCHMARK(BM_LipschitzLse)->RangeMultiplier(4)->Range(128, 8192);

static void BM_KernelRidge(benchmark::State& state) {
  RkhsSystemOptions o;
  o.burn_in = 100;
  const SystemSpec spec = make_random_rkhs_system(3, 500, 0.9, 3, o);
  const Trajectory tr = simulate(spec, static_cast<int>(state.range(0)), 4);
  const double radius = spec.truth.as<KernelExpansion>()->hilbert_norm();
  for (auto _ : state) benchmark::DoNotOptimize(lse_kernel_ridge(tr, GaussianKernel{1.0}, radius));
}
BENCHMARK(BM_KernelRidge)->Arg(50)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_Glm(benchmark::State& state) {
  SystemConfig c;
  c.truth.type = "glm_random";
  c.d_x = c.d_y = 3;
  c.state_bound = 2.0;
  const SystemSpec spec = build_system(c, 5);
  const Trajectory tr = simulate(spec, static_cast<int>(state.range(0)), 6);
  for (auto _ : state) benchmark::DoNotOptimize(lse_glm(tr, Link::Tanh, 2.0));
}
BENCHMARK(BM_Glm)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
