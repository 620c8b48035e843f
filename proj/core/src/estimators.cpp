#include "nplse/estimators.hpp"

#include "nplse/csv.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nplse {

double training_error(const Function& f, const Trajectory& traj) {
  const int T = traj.T();
  if (T == 0) return 0.0;
  Vec out(f.output_dim());
  double total = 0.0;
  for (int t = 0; t < T; ++t) {
    f.evaluate(traj.states.row(t).transpose(), out);
    total += (traj.outputs.row(t).transpose() - out).squaredNorm();
  }
  return total / T;
}

FittedModel lse_finite(const FiniteClass& cls, const Trajectory& traj) {
  if (cls.members.empty()) throw std::invalid_argument("lse_finite: empty class");
  FittedModel m;
  m.class_tag = "finite";
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cls.members.size(); ++i) {
    const double obj = training_error(cls.members[i], traj);
    if (obj < best) {
      best = obj;
      m.member_index = static_cast<int>(i);
    }
  }
  m.f = cls.members[m.member_index];
  m.diagnostics.iterations = static_cast<int>(cls.members.size());
  m.diagnostics.objective = best;
  return m;
}

namespace {

// Derivative of a convex piecewise-quadratic function, D(x) = s x + c on [a, b].
struct Piece {
  double a, b, s, c;
  double at(double x) const { return s * x + c; }
};

double argmin_of(const std::vector<Piece>& pieces) {
  for (const Piece& p : pieces) {
    if (p.at(p.a) >= 0.0) return p.a;
    if (p.at(p.b) >= 0.0) return p.s > 0.0 ? std::clamp(-p.c / p.s, p.a, p.b) : p.b;
  }
  return pieces.back().b;
}

// Derivative of x -> min_{|x' - x| <= g} F(x'), restricted to [lo, hi].
std::vector<Piece> erode(const std::vector<Piece>& pieces, double m, double g, double lo, double hi) {
  std::vector<Piece> out;
  out.reserve(pieces.size() + 2);
  auto push = [&](double a, double b, double s, double c) {
    a = std::max(a, lo);
    b = std::min(b, hi);
    if (b > a) out.push_back({a, b, s, c});
  };
  for (const Piece& p : pieces)
    if (p.a < m) push(p.a - g, std::min(p.b, m) - g, p.s, p.c + p.s * g);
  push(m - g, m + g, 0.0, 0.0);
  for (const Piece& p : pieces)
    if (p.b > m) push(std::max(p.a, m) + g, p.b + g, p.s, p.c - p.s * g);
  if (out.empty()) out.push_back({lo, hi, 0.0, 0.0});
  return out;
}

}  // namespace

Vec solve_lipschitz_chain(const Vec& targets, const Vec& weights, const Vec& gaps, double lo, double hi) {
  const Eigen::Index n = targets.size();
  if (n == 0) return Vec();
  if (weights.size() != n || gaps.size() != n - 1)
    throw std::invalid_argument("solve_lipschitz_chain: size mismatch");
  if (!(hi >= lo)) throw std::invalid_argument("solve_lipschitz_chain: empty box");
  if (hi == lo) return Vec::Constant(n, lo);

  std::vector<double> minimizers(n);
  std::vector<Piece> pieces{{lo, hi, 2.0 * weights[0], -2.0 * weights[0] * targets[0]}};
  for (Eigen::Index i = 0;; ++i) {
    minimizers[i] = argmin_of(pieces);
    if (i + 1 == n) break;
    pieces = erode(pieces, minimizers[i], gaps[i], lo, hi);
    const double w = weights[i + 1];
    for (Piece& p : pieces) {
      p.s += 2.0 * w;
      p.c -= 2.0 * w * targets[i + 1];
    }
  }
  Vec theta(n);
  theta[n - 1] = minimizers[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i)
    theta[i] = std::clamp(minimizers[i], theta[i + 1] - gaps[i], theta[i + 1] + gaps[i]);
  return theta;
}

FittedModel lse_lipschitz1d(const Trajectory& traj, double L, double lo, double hi,
                            const EstimatorOptions& options) {
  if (traj.states.cols() != 1 || traj.outputs.cols() != 1)
    throw std::invalid_argument("lse_lipschitz1d: needs d_x = d_y = 1");
  if (!(L >= 0.0) || !(hi >= lo)) throw std::invalid_argument("lse_lipschitz1d: need L >= 0 and lo <= hi");
  const int T = traj.T();
  if (T < 1) throw std::invalid_argument("lse_lipschitz1d: empty trajectory");

  std::vector<int> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return traj.states(a, 0) < traj.states(b, 0); });
  std::vector<double> xs, sums, counts;
  for (int idx : order) {
    const double x = traj.states(idx, 0);
    if (xs.empty() || x != xs.back()) {
      xs.push_back(x);
      sums.push_back(0.0);
      counts.push_back(0.0);
    }
    sums.back() += traj.outputs(idx, 0);
    counts.back() += 1.0;
  }
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  Vec x = Eigen::Map<Vec>(xs.data(), n);
  Vec w = Eigen::Map<Vec>(counts.data(), n);
  Vec y = Eigen::Map<Vec>(sums.data(), n).cwiseQuotient(w);
  Vec gaps(n > 0 ? n - 1 : 0);
  for (Eigen::Index i = 0; i + 1 < n; ++i) gaps[i] = L * (x[i + 1] - x[i]);

  Vec theta = solve_lipschitz_chain(y, w, gaps, lo, hi);

  FittedModel m;
  m.class_tag = "lipschitz1d";
  m.design_x = x;
  m.node_values = theta;
  m.L = L;
  m.lo = lo;
  m.hi = hi;
  m.f = n == 1 ? constant_function(theta[0]) : piecewise_linear(x, theta);
  m.diagnostics.iterations = static_cast<int>(n);
  m.diagnostics.objective = training_error(m.f, traj);

  double slack = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i + 1 < n; ++i) slack = std::max(slack, std::abs(theta[i + 1] - theta[i]) - gaps[i]);
  slack = std::max(slack, std::max(theta.maxCoeff() - hi, lo - theta.minCoeff()));
  m.diagnostics.constraint_slack = slack;

  // Fixed-point residual of the projected gradient map; the projection is the
  // same chain problem with unit weights.
  const double step = 0.5 / w.maxCoeff();
  Vec grad = 2.0 * w.cwiseProduct(theta - y);
  Vec proj = solve_lipschitz_chain(theta - step * grad, Vec::Ones(n), gaps, lo, hi);
  m.diagnostics.kkt_residual = (theta - proj).cwiseAbs().maxCoeff() / step / T;
  if (!(m.diagnostics.kkt_residual <= options.kkt_tolerance))
    throw NumericalError("lse_lipschitz1d: KKT residual " + format_double(m.diagnostics.kkt_residual) +
                         " above tolerance");
  return m;
}

FittedModel lse_kernel_ridge(const Trajectory& traj, GaussianKernel kernel, double radius,
                             const EstimatorOptions& options) {
  if (!(radius > 0.0)) throw std::invalid_argument("lse_kernel_ridge: radius must be > 0");
  if (!(kernel.bandwidth > 0.0)) throw std::invalid_argument("lse_kernel_ridge: bandwidth must be > 0");
  const int T = traj.T();
  if (T < 1) throw std::invalid_argument("lse_kernel_ridge: empty trajectory");
  const Samples& X = traj.states;
  const Mat Y = traj.outputs;

  Mat K(T, T);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j <= i; ++j) K(i, j) = K(j, i) = kernel(X.row(i).transpose(), X.row(j).transpose());

  // Smallest jitter for which the Gram matrix factors.
  double jitter = 1e-10 * K.trace() / T;
  {
    int attempt = 0;
    for (;; ++attempt) {
      Eigen::LLT<Mat> llt(K + jitter * Mat::Identity(T, T));
      if (llt.info() == Eigen::Success) break;
      if (attempt == 10) throw NumericalError("lse_kernel_ridge: Gram matrix is numerically degenerate");
      jitter *= 10.0;
    }
  }

  Eigen::SelfAdjointEigenSolver<Mat> eig(K);
  const Vec lam = eig.eigenvalues().cwiseMax(0.0);
  const Mat beta = eig.eigenvectors().transpose() * Y;
  const Vec beta_sq = beta.rowwise().squaredNorm();
  auto norm_at = [&](double mu) {
    double s = 0.0;
    for (int i = 0; i < T; ++i) s += lam[i] * beta_sq[i] / ((lam[i] + mu) * (lam[i] + mu));
    return std::sqrt(s);
  };

  // mu = T * lambda is the ridge term on top of the jitter.
  double mu = 0.0;
  int iterations = 0;
  if (std::isfinite(radius) && norm_at(jitter) > radius) {
    double hi = std::max(jitter, 1e-12 * std::max(K.trace(), 1.0));
    double lo = 0.0;
    while (norm_at(jitter + hi) > radius) {
      lo = hi;
      hi *= 10.0;
      ++iterations;
    }
    const double floor_norm = radius * (1.0 - options.norm_tolerance);
    while (norm_at(jitter + hi) < floor_norm && iterations < 500) {
      const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
      if (norm_at(jitter + mid) > radius) lo = mid;
      else hi = mid;
      ++iterations;
    }
    mu = hi;
  }

  Eigen::LLT<Mat> llt(K + (jitter + mu) * Mat::Identity(T, T));
  if (llt.info() != Eigen::Success) throw NumericalError("lse_kernel_ridge: factorization failed");
  Mat c = llt.solve(Y);

  FittedModel m;
  m.class_tag = "rkhs_ball";
  m.centers = X;
  m.dual_coeffs = c;
  m.bandwidth = kernel.bandwidth;
  m.ridge_lambda = mu / T;
  m.jitter = jitter;
  m.radius = radius;
  m.hilbert_norm = std::sqrt(std::max((c.transpose() * K * c).trace(), 0.0));
  m.f = kernel_expansion(X, c, kernel);
  m.diagnostics.iterations = iterations;
  m.diagnostics.objective = training_error(m.f, traj);
  m.diagnostics.constraint_slack = std::isfinite(radius) ? m.hilbert_norm - radius : -1.0;
  m.diagnostics.kkt_residual = ((K + (jitter + mu) * Mat::Identity(T, T)) * c - Y).cwiseAbs().maxCoeff();
  return m;
}

namespace {

struct GlmProblem {
  const Samples& X;
  const Samples& Y;
  Link link;
  double objective(const Mat& A) const {
    Mat U = X * A.transpose();
    if (link == Link::Tanh) U = U.array().tanh().matrix();
    return (Y - U).squaredNorm() / X.rows();
  }
  Mat gradient(const Mat& A) const {
    Mat U = X * A.transpose();
    Mat R(U.rows(), U.cols());
    if (link == Link::Tanh) {
      Mat th = U.array().tanh().matrix();
      R = ((Y - th).array() * (1.0 - th.array().square())).matrix();
    } else {
      R = Y - U;
    }
    return (-2.0 / X.rows()) * R.transpose() * X;
  }
};

Mat project_frobenius(const Mat& A, double C) {
  const double n = A.norm();
  return n > C ? Mat(A * (C / n)) : A;
}

}  // namespace

FittedModel lse_glm(const Trajectory& traj, Link link, double C, const EstimatorOptions& options) {
  if (!(C > 0.0)) throw std::invalid_argument("lse_glm: C must be > 0");
  const int T = traj.T();
  const int d_in = static_cast<int>(traj.states.cols());
  const int d_out = static_cast<int>(traj.outputs.cols());
  if (T < 1) throw std::invalid_argument("lse_glm: empty trajectory");
  GlmProblem prob{traj.states, traj.outputs, link};

  Mat A = Mat::Zero(d_out, d_in);
  double J = prob.objective(A);
  Mat G = prob.gradient(A);
  Mat best = A;
  double best_J = J;
  double step = 1.0;
  double mapping = std::numeric_limits<double>::infinity();
  Mat prev_A, prev_G;
  int it = 0;
  for (; it < options.glm_max_iterations; ++it) {
    if (it > 0) {
      const Mat dA = A - prev_A, dG = G - prev_G;
      const double curv = (dA.array() * dG.array()).sum();
      if (curv > 0.0) step = dA.squaredNorm() / curv;
    }
    Mat next;
    double next_J;
    for (int bt = 0;; ++bt) {
      next = project_frobenius(A - step * G, C);
      next_J = prob.objective(next);
      if (!std::isfinite(next_J))
        throw NumericalError("lse_glm: non-finite objective at iterate " + std::to_string(it + 1));
      const Mat d = next - A;
      if (next_J <= J + (G.array() * d.array()).sum() + d.squaredNorm() / (2.0 * step) + 1e-15 * std::abs(J) ||
          bt == 60)
        break;
      step *= 0.5;
    }
    mapping = (A - next).norm() / step;
    prev_A = A;
    prev_G = G;
    A = next;
    J = next_J;
    G = prob.gradient(A);
    if (J < best_J) {
      best_J = J;
      best = A;
    }
    if (mapping <= options.kkt_tolerance) {
      ++it;
      break;
    }
  }

  FittedModel m;
  m.class_tag = "glm";
  m.matrix = best;
  m.link = link;
  m.C = C;
  m.f = glm_function(best, link);
  m.diagnostics.iterations = it;
  m.diagnostics.objective = best_J;
  m.diagnostics.constraint_slack = best.norm() - C;
  m.diagnostics.kkt_residual = mapping;
  return m;
}

FittedModel fit(const HypothesisClass& cls, const Trajectory& traj, const EstimatorOptions& options) {
  if (const auto* c = std::get_if<Lipschitz1DClass>(&cls.variant)) return lse_lipschitz1d(traj, c->L, c->lo, c->hi, options);
  if (const auto* c = std::get_if<RkhsBallClass>(&cls.variant)) return lse_kernel_ridge(traj, c->kernel, c->radius, options);
  if (const auto* c = std::get_if<GlmClass>(&cls.variant)) return lse_glm(traj, c->link, c->C, options);
  return lse_finite(std::get<FiniteClass>(cls.variant), traj);
}

std::string membership_violation(const FittedModel& m, const EstimatorOptions& options) {
  std::ostringstream os;
  if (m.class_tag == "lipschitz1d") {
    for (Eigen::Index i = 0; i + 1 < m.design_x.size(); ++i) {
      const double excess = std::abs(m.node_values[i + 1] - m.node_values[i]) -
                            m.L * (m.design_x[i + 1] - m.design_x[i]);
      if (excess > options.slope_tolerance) {
        os << "slope constraint between nodes " << i << " and " << i + 1 << " violated by " << excess;
        return os.str();
      }
    }
    if (m.node_values.size() > 0 &&
        (m.node_values.maxCoeff() > m.hi + options.slope_tolerance ||
         m.node_values.minCoeff() < m.lo - options.slope_tolerance))
      return "node values leave the value range";
  } else if (m.class_tag == "rkhs_ball") {
    if (std::isfinite(m.radius) && m.hilbert_norm > m.radius * (1.0 + options.certificate_tolerance)) {
      os << "Hilbert norm " << m.hilbert_norm << " exceeds radius " << m.radius;
      return os.str();
    }
  } else if (m.class_tag == "glm") {
    if (m.matrix.norm() > m.C * (1.0 + 1e-12)) {
      os << "Frobenius norm " << m.matrix.norm() << " exceeds " << m.C;
      return os.str();
    }
  }
  return {};
}

void write_model(std::ostream& os, const FittedModel& m) {
  CsvTable t;
  t.comments.push_back("model class=" + m.class_tag);
  t.comments.push_back("diagnostics iterations=" + std::to_string(m.diagnostics.iterations) +
                       " objective=" + format_double(m.diagnostics.objective) +
                       " constraint_slack=" + format_double(m.diagnostics.constraint_slack) +
                       " kkt_residual=" + format_double(m.diagnostics.kkt_residual));
  auto row_of = [](auto&&... cells) { return std::vector<std::string>{format_double(cells)...}; };
  if (m.class_tag == "lipschitz1d") {
    t.comments.push_back("param L=" + format_double(m.L) + " lo=" + format_double(m.lo) + " hi=" + format_double(m.hi));
    t.header = {"x", "theta"};
    for (Eigen::Index i = 0; i < m.design_x.size(); ++i) t.rows.push_back(row_of(m.design_x[i], m.node_values[i]));
  } else if (m.class_tag == "rkhs_ball") {
    t.comments.push_back("param bandwidth=" + format_double(m.bandwidth) + " lambda=" + format_double(m.ridge_lambda) +
                         " jitter=" + format_double(m.jitter) + " hilbert_norm=" + format_double(m.hilbert_norm) +
                         " radius=" + format_double(m.radius));
    for (Eigen::Index j = 0; j < m.centers.cols(); ++j) t.header.push_back("z" + std::to_string(j));
    for (Eigen::Index j = 0; j < m.dual_coeffs.cols(); ++j) t.header.push_back("c" + std::to_string(j));
    for (Eigen::Index i = 0; i < m.centers.rows(); ++i) {
      std::vector<std::string> row;
      for (Eigen::Index j = 0; j < m.centers.cols(); ++j) row.push_back(format_double(m.centers(i, j)));
      for (Eigen::Index j = 0; j < m.dual_coeffs.cols(); ++j) row.push_back(format_double(m.dual_coeffs(i, j)));
      t.rows.push_back(std::move(row));
    }
  } else if (m.class_tag == "glm") {
    t.comments.push_back("param link=" + link_name(m.link) + " C=" + format_double(m.C));
    for (Eigen::Index j = 0; j < m.matrix.cols(); ++j) t.header.push_back("a" + std::to_string(j));
    for (Eigen::Index i = 0; i < m.matrix.rows(); ++i) {
      std::vector<std::string> row;
      for (Eigen::Index j = 0; j < m.matrix.cols(); ++j) row.push_back(format_double(m.matrix(i, j)));
      t.rows.push_back(std::move(row));
    }
  } else if (m.class_tag == "finite") {
    const auto* pl = m.f.as<PiecewiseLinear>();
    const auto* cst = m.f.as<ConstantMap>();
    t.comments.push_back("param member_index=" + std::to_string(m.member_index));
    t.header = {"x", "theta"};
    if (pl) {
      for (Eigen::Index i = 0; i < pl->knots().size(); ++i) t.rows.push_back(row_of(pl->knots()[i], pl->values()[i]));
    } else if (cst && cst->value().size() == 1 && cst->input_dim() == 1) {
      t.rows.push_back(row_of(0.0, cst->value()[0]));
    } else {
      throw std::invalid_argument("write_model: finite-class member is not a tabulated 1-D function");
    }
  } else {
    throw std::invalid_argument("write_model: unknown class tag '" + m.class_tag + "'");
  }
  write_csv(os, t);
}

namespace {

std::map<std::string, std::string> comment_fields(const std::vector<std::string>& comments, const std::string& key) {
  std::map<std::string, std::string> out;
  for (const auto& c : comments) {
    if (c.rfind(key + " ", 0) != 0) continue;
    std::istringstream is(c.substr(key.size() + 1));
    std::string tok;
    while (is >> tok) {
      auto eq = tok.find('=');
      if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  return out;
}

double to_double(const std::map<std::string, std::string>& fields, const std::string& name) {
  auto it = fields.find(name);
  if (it == fields.end()) throw std::runtime_error("model artifact: missing field '" + name + "'");
  return std::stod(it->second);
}

}  // namespace

FittedModel read_model(std::istream& is) {
  CsvTable t = read_csv(is);
  const auto model = comment_fields(t.comments, "model");
  auto cls = model.find("class");
  if (cls == model.end()) throw std::runtime_error("model artifact: missing '# model class=' line");
  const auto diag = comment_fields(t.comments, "diagnostics");
  const auto param = comment_fields(t.comments, "param");
  FittedModel m;
  m.class_tag = cls->second;
  if (diag.count("iterations")) m.diagnostics.iterations = static_cast<int>(to_double(diag, "iterations"));
  if (diag.count("objective")) m.diagnostics.objective = to_double(diag, "objective");
  if (diag.count("constraint_slack")) m.diagnostics.constraint_slack = to_double(diag, "constraint_slack");
  if (diag.count("kkt_residual")) m.diagnostics.kkt_residual = to_double(diag, "kkt_residual");
  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  if (m.class_tag == "lipschitz1d" || m.class_tag == "finite") {
    Vec x(n), v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x[i] = t.number(i, "x");
      v[i] = t.number(i, "theta");
    }
    if (m.class_tag == "lipschitz1d") {
      m.L = to_double(param, "L");
      m.lo = to_double(param, "lo");
      m.hi = to_double(param, "hi");
      m.design_x = x;
      m.node_values = v;
    } else {
      m.member_index = static_cast<int>(to_double(param, "member_index"));
    }
    m.f = n == 1 ? constant_function(v[0]) : piecewise_linear(x, v);
  } else if (m.class_tag == "rkhs_ball") {
    int dz = 0, dc = 0;
    for (const auto& h : t.header) (h[0] == 'z' ? dz : dc)++;
    m.centers.resize(n, dz);
    m.dual_coeffs.resize(n, dc);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < dz; ++j) m.centers(i, j) = t.number(i, j);
      for (int j = 0; j < dc; ++j) m.dual_coeffs(i, j) = t.number(i, dz + j);
    }
    m.bandwidth = to_double(param, "bandwidth");
    m.ridge_lambda = to_double(param, "lambda");
    m.jitter = to_double(param, "jitter");
    m.hilbert_norm = to_double(param, "hilbert_norm");
    m.radius = to_double(param, "radius");
    m.f = kernel_expansion(m.centers, m.dual_coeffs, GaussianKernel{m.bandwidth});
  } else if (m.class_tag == "glm") {
    const int d = static_cast<int>(t.header.size());
    m.matrix.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) m.matrix(i, j) = t.number(i, j);
    m.link = parse_link(param.at("link"));
    m.C = to_double(param, "C");
    m.f = glm_function(m.matrix, m.link);
  } else {
    throw std::runtime_error("model artifact: unknown class '" + m.class_tag + "'");
  }
  return m;
}

}  // namespace nplse
