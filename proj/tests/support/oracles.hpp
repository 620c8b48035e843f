#pragma once

// Independent reference computations used as test oracles. None of these
// share code paths with the library routines they check.

#include "nplse/dynamics.hpp"
#include "nplse/types.hpp"

#include <functional>
#include <vector>

namespace oracle {

using nplse::Mat;
using nplse::Vec;

/// Primal active-set method for min 0.5 x'Qx + c'x s.t. Ax <= b, Q positive
/// definite, started from a feasible x0.
Vec active_set_qp(const Mat& Q, const Vec& c, const Mat& A, const Vec& b, Vec x0, int max_iter = 10000);

/// Counts level sequences v_0..v_{n-1} in {0..levels-1} with |v_{i+1} - v_i| <= 1
/// by enumerating all levels^n sequences.
long long count_staircases_bruteforce(int nodes, int levels);

/// Largest singular value by power iteration on A'A.
double power_iteration_op_norm(const Mat& A, int iters = 2000);

/// Midpoint rule with n cells.
double midpoint_riemann(const std::function<double(double)>& f, double a, double b, long n);

/// Slope and intercept of y on x by the 2x2 normal equations.
std::pair<double, double> ols_line(const std::vector<double>& x, const std::vector<double>& y);

/// Total variation distance of two probability vectors.
double tv_distance(const Vec& p, const Vec& q);

/// Optimal objective (1/T) sum (y - f(x))^2 of the Lipschitz-constrained,
/// range-clamped 1-D regression, solved by active_set_qp over the distinct
/// sorted design points.
double lipschitz_qp_objective(const nplse::Trajectory& tr, double L, double lo, double hi);

}  // namespace oracle
