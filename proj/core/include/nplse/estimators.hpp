#pragma once

#include "nplse/dynamics.hpp"
#include "nplse/function.hpp"
#include "nplse/hypothesis.hpp"

#include <iosfwd>
#include <string>

namespace nplse {

struct SolverDiagnostics {
  int iterations = 0;
  double objective = 0.0;         ///< (1/T) sum |y_t - f(x_t)|^2 at the returned fit
  double constraint_slack = 0.0;  ///< largest constraint violation (<= 0 means feasible)
  double kkt_residual = 0.0;
};

struct FittedModel {
  Function f;
  std::string class_tag;
  SolverDiagnostics diagnostics;

  // lipschitz1d: merged sorted design points and node values
  Vec design_x;
  Vec node_values;
  double L = 0.0, lo = 0.0, hi = 0.0;

  // rkhs_ball: expansion over the training states
  Samples centers;
  Mat dual_coeffs;
  double bandwidth = 1.0;
  double ridge_lambda = 0.0;
  double jitter = 0.0;
  double hilbert_norm = 0.0;
  double radius = 0.0;

  // glm
  Mat matrix;
  Link link = Link::Identity;
  double C = 0.0;

  // finite
  int member_index = -1;
};

struct EstimatorOptions {
  double kkt_tolerance = 1e-8;
  double certificate_tolerance = 1e-6;
  double slope_tolerance = 1e-8;
  double norm_tolerance = 0.01;  ///< relative gap to the radius accepted by the bisection
  int glm_max_iterations = 10000;
};

/// (1/T) sum_t |y_t - f(x_t)|^2
double training_error(const Function& f, const Trajectory& traj);

FittedModel lse_finite(const FiniteClass& cls, const Trajectory& traj);
FittedModel lse_lipschitz1d(const Trajectory& traj, double L, double lo, double hi,
                            const EstimatorOptions& options = {});
FittedModel lse_kernel_ridge(const Trajectory& traj, GaussianKernel kernel, double radius,
                             const EstimatorOptions& options = {});
FittedModel lse_glm(const Trajectory& traj, Link link, double C, const EstimatorOptions& options = {});

/// Dispatches on the class variant.
FittedModel fit(const HypothesisClass& cls, const Trajectory& traj, const EstimatorOptions& options = {});

/// Empty string when the model satisfies its class constraints, otherwise a
/// description of the violation.
std::string membership_violation(const FittedModel& model, const EstimatorOptions& options = {});

/// Columnar text artifact: '#' metadata lines, a column header and one row
/// per design point / center / matrix row. Finite-class fits are written as
/// the selected member's knots when it is piecewise linear.
void write_model(std::ostream& os, const FittedModel& model);
FittedModel read_model(std::istream& is);

/// Exact minimizer of sum_i w_i (theta_i - y_i)^2 subject to
/// |theta_{i+1} - theta_i| <= gaps_i and lo <= theta_i <= hi.
Vec solve_lipschitz_chain(const Vec& targets, const Vec& weights, const Vec& gaps, double lo, double hi);

}  // namespace nplse
