#pragma once

#include "nplse/dynamics.hpp"
#include "nplse/estimators.hpp"
#include "nplse/function.hpp"
#include "nplse/hypothesis.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace nplse {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Callers write
/// results into slot i, so the outcome does not depend on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

/// Seed of replicate r under a named experiment stream.
std::uint64_t replicate_seed(std::uint64_t seed, std::string_view stream, int r);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

/// Mean and standard error (sample std / sqrt n) in index order.
MeanSe mean_se(const std::vector<double>& xs);

/// Monte-Carlo estimate of E |f_hat(xi) - f*(xi)| with xi = x'_tau from
/// independent fresh trajectories.
MeanSe counterfactual_error(const Function& fitted, const SystemSpec& spec, int T, int n_fresh,
                            std::uint64_t seed);

/// Symmetric grid of n points on [-lambda_max, lambda_max] with
/// lambda_max = 6 sqrt(T) / range, range being an a-priori bound on |f - g|.
std::vector<double> default_lambda_grid(double range, int T, int n = 21);

struct SigmaEstimate {
  double value = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int dropped_lambdas = 0;  ///< grid points skipped for MGF overflow
};

/// Empirical variance proxy of F(Z) = (1/T) sum |f(x_t) - g(x_t)| over the
/// given pairs: max over pairs and nonzero grid points of
/// 2 log(E exp(lambda (F - E F))) / lambda^2, with a 200-resample bootstrap CI.
SigmaEstimate estimate_sigma_T(const std::vector<std::pair<Function, Function>>& pairs, const SystemSpec& spec,
                               int T, int n_rep, const std::vector<double>& lambda_grid, std::uint64_t seed,
                               int threads = 1);

/// M_T(h) = sum_t [4 <w_t, h(x_t)> - |h(x_t)|^2] from stored noises.
double offset_process(const Function& h, const Trajectory& traj);

struct OffsetProcessSample {
  std::vector<double> values;
  double sup = 0.0;
};
/// M_T over S = {f - truth : f in members}.
OffsetProcessSample offset_process_sample(const std::vector<Function>& members, const Function& truth,
                                          const Trajectory& traj);

/// Monte-Carlo mean of exp(lambda M_T(h)) over independent trajectories.
MeanSe mgf_check(const Function& h, const SystemSpec& spec, int T, double lambda, int n_rep, std::uint64_t seed,
                 int threads = 1);

struct OffsetSupremum {
  MeanSe estimate;
  double maximal_bound = 0.0;  ///< 2 sigma_w^2 log |S|
  double chaining_bound = 0.0; ///< sqrt(2 T sigma_w^2 r^2 log |S|), r = max sup norm of S on the grid
  double r = 0.0;
};
OffsetSupremum offset_supremum(const FiniteClass& cls, const SystemSpec& spec, int T, int n_rep, std::uint64_t seed,
                               int threads = 1, const Samples* grid = nullptr);

struct BasicInequality {
  double lhs = 0.0;  ///< (1/T) sum |f_hat - f*|^2 on the training states
  double rhs = 0.0;  ///< (1/T) sup over the class of M_T(f - f*)
  bool holds = false;
};
BasicInequality basic_inequality_check(const FiniteClass& cls, const Function& truth, const Trajectory& traj);

/// Plug-in Shannon entropy with the Miller-Madow correction, capped at log(support_size).
double miller_madow_entropy(const std::vector<int>& counts, int support_size);

struct DecouplingResult {
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  double training_term = 0.0;
  double entropy = 0.0;
  double sigma_T_sq = 0.0;
  bool pass = false;
};
DecouplingResult decoupling_check(const FiniteClass& cls, const SystemSpec& spec, int T, int n_rep, int n_fresh,
                                  double sigma_T_sq, std::uint64_t seed, int threads = 1);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};
/// OLS of log(error) on log(T) with a 95% t-interval on the slope.
RateFit fit_rate(const std::vector<double>& Ts, const std::vector<double>& errors);

struct ExperimentRow {
  std::string suite;
  int T = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double error = 0.0;
  double se = 0.0;
  double bound_master = 0.0;
  double bound_rate = 0.0;
  double sigma_T_emp = 0.0;
  double sigma_T_bound = 0.0;
};

struct ExperimentReport {
  std::vector<std::string> provenance;
  std::vector<ExperimentRow> rows;
  RateFit fit;
  std::vector<std::pair<std::string, std::string>> footer_extra;
};

void write_experiment_report(std::ostream& os, const ExperimentReport& report);
ExperimentReport read_experiment_report(std::istream& is);

}  // namespace nplse
