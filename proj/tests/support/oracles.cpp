#include "oracles.hpp"

#include <cmath>
#include <map>
#include <limits>
#include <stdexcept>

namespace oracle {

Vec active_set_qp(const Mat& Q, const Vec& c, const Mat& A, const Vec& b, Vec x, int max_iter) {
  const int n = static_cast<int>(Q.rows());
  const int m = static_cast<int>(A.rows());
  std::vector<int> work;
  for (int i = 0; i < m; ++i)
    if (std::abs(A.row(i).dot(x) - b[i]) < 1e-12) work.push_back(i);

  for (int it = 0; it < max_iter; ++it) {
    const int k = static_cast<int>(work.size());
    Mat K = Mat::Zero(n + k, n + k);
    K.topLeftCorner(n, n) = Q;
    for (int j = 0; j < k; ++j) {
      K.block(0, n + j, n, 1) = A.row(work[j]).transpose();
      K.block(n + j, 0, 1, n) = A.row(work[j]);
    }
    Vec rhs = Vec::Zero(n + k);
    rhs.head(n) = -(Q * x + c);
    const Vec sol = K.fullPivLu().solve(rhs);
    const Vec p = sol.head(n);
    if (p.norm() < 1e-13 * (1.0 + x.norm())) {
      // Q x + c + A_W' mu = 0 at a stationary point; mu must be nonnegative
      int worst = -1;
      double most = -1e-12;
      for (int j = 0; j < k; ++j) {
        const double mu = sol[n + j];
        if (mu < most) {
          most = mu;
          worst = j;
        }
      }
      if (worst < 0) return x;
      work.erase(work.begin() + worst);
      continue;
    }
    double step = 1.0;
    int blocking = -1;
    for (int i = 0; i < m; ++i) {
      bool in = false;
      for (int w : work) in = in || w == i;
      if (in) continue;
      const double ap = A.row(i).dot(p);
      if (ap > 1e-15) {
        const double s = (b[i] - A.row(i).dot(x)) / ap;
        if (s < step) {
          step = s;
          blocking = i;
        }
      }
    }
    x += std::max(step, 0.0) * p;
    if (blocking >= 0) work.push_back(blocking);
  }
  throw std::runtime_error("active_set_qp: no convergence");
}

long long count_staircases_bruteforce(int nodes, int levels) {
  std::vector<int> v(nodes, 0);
  long long count = 0;
  while (true) {
    bool ok = true;
    for (int i = 0; i + 1 < nodes && ok; ++i) ok = std::abs(v[i + 1] - v[i]) <= 1;
    count += ok;
    int i = 0;
    while (i < nodes && ++v[i] == levels) v[i++] = 0;
    if (i == nodes) break;
  }
  return count;
}

double power_iteration_op_norm(const Mat& A, int iters) {
  Vec v = Vec::Ones(A.cols()) / std::sqrt(static_cast<double>(A.cols()));
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vec w = A.transpose() * (A * v);
    lambda = w.norm();
    if (lambda == 0.0) return 0.0;
    v = w / lambda;
  }
  return std::sqrt(lambda);
}

double midpoint_riemann(const std::function<double(double)>& f, double a, double b, long n) {
  const double h = (b - a) / static_cast<double>(n);
  long double s = 0.0;
  for (long i = 0; i < n; ++i) s += f(a + (i + 0.5) * h);
  return static_cast<double>(s * h);
}

std::pair<double, double> ols_line(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

double tv_distance(const Vec& p, const Vec& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

// Objective of the Lipschitz-constrained problem via a generic QP over the
// distinct sorted design points.
double lipschitz_qp_objective(const nplse::Trajectory& tr, double L, double lo, double hi) {
  std::map<double, std::pair<double, double>> groups;  // x -> (sum y, count)
  double ysq = 0.0;
  for (int t = 0; t < tr.T(); ++t) {
    auto& g = groups[tr.states(t, 0)];
    g.first += tr.outputs(t, 0);
    g.second += 1.0;
    ysq += tr.outputs(t, 0) * tr.outputs(t, 0);
  }
  const int n = static_cast<int>(groups.size());
  const double T = tr.T();
  Mat Q = Mat::Zero(n, n);
  Vec c(n), xs(n);
  int i = 0;
  for (const auto& [x, g] : groups) {
    xs[i] = x;
    Q(i, i) = 2.0 * g.second / T;
    c[i] = -2.0 * g.first / T;
    ++i;
  }
  const int m = 2 * (n - 1) + 2 * n;
  Mat A = Mat::Zero(m, n);
  Vec b(m);
  int r = 0;
  for (int k = 0; k + 1 < n; ++k) {
    const double gap = L * (xs[k + 1] - xs[k]);
    A(r, k + 1) = 1.0, A(r, k) = -1.0, b[r++] = gap;
    A(r, k + 1) = -1.0, A(r, k) = 1.0, b[r++] = gap;
  }
  for (int k = 0; k < n; ++k) {
    A(r, k) = 1.0, b[r++] = hi;
    A(r, k) = -1.0, b[r++] = -lo;
  }
  const Vec theta = active_set_qp(Q, c, A, b, Vec::Constant(n, 0.5 * (lo + hi)));
  return 0.5 * theta.dot(Q * theta) + c.dot(theta) + ysq / T;
}

}  // namespace oracle
