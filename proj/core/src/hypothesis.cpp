#include "nplse/hypothesis.hpp"

#include "nplse/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nplse {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string("entropy model: ") + name + " must be finite and > 0");
}

constexpr double kCertifyTolerance = 1e-9;

std::string fmt(double v) { return format_double(v); }

}  // namespace

void validate(const EntropyModel& model) {
  std::visit(overloaded{
                 [](const NonparametricEntropy& m) {
                   require_positive(m.p, "p");
                   require_positive(m.q, "q");
                 },
                 [](const ParametricEntropy& m) {
                   require_positive(m.p, "p");
                   require_positive(m.c, "c");
                 },
                 [](const RkhsEntropy& m) {
                   require_positive(m.A, "A");
                   require_positive(m.alpha, "alpha");
                   require_positive(m.lambda_1, "lambda_1");
                   require_positive(m.prefactor, "prefactor");
                 },
                 [](const FiniteEntropy& m) {
                   if (!(m.log_cardinality >= 0.0) || !std::isfinite(m.log_cardinality))
                     throw std::invalid_argument("entropy model: log cardinality must be >= 0");
                 },
             },
             model);
}

double log_covering_bound(const EntropyModel& model, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("log_covering_bound: delta must be > 0");
  return std::visit(overloaded{
                        [&](const NonparametricEntropy& m) { return m.p * std::pow(delta, -m.q); },
                        [&](const ParametricEntropy& m) { return m.p * std::log1p(m.c / delta); },
                        [&](const RkhsEntropy& m) {
                          const double e = 1.0 + 1.0 / (2.0 * m.alpha);
                          return m.prefactor * std::pow(delta / m.A, -1.0 / m.alpha) *
                                 std::log1p(m.lambda_1 * std::pow(m.A, e) / std::pow(delta, e));
                        },
                        [&](const FiniteEntropy& m) { return m.log_cardinality; },
                    },
                    model);
}

std::string describe(const EntropyModel& model) {
  return std::visit(
      overloaded{
          [](const NonparametricEntropy& m) {
            return "nonparametric(p=" + fmt(m.p) + " q=" + fmt(m.q) + ")";
          },
          [](const ParametricEntropy& m) {
            return "parametric(p=" + fmt(m.p) + " c=" + fmt(m.c) + ")";
          },
          [](const RkhsEntropy& m) {
            return "rkhs(A=" + fmt(m.A) + " alpha=" + fmt(m.alpha) + " lambda_1=" +
                   fmt(m.lambda_1) + " prefactor=" + fmt(m.prefactor) + ")";
          },
          [](const FiniteEntropy& m) { return "finite(log_cardinality=" + fmt(m.log_cardinality) + ")"; },
      },
      model);
}

std::string HypothesisClass::tag() const {
  return std::visit(overloaded{
                        [](const Lipschitz1DClass&) { return std::string("lipschitz1d"); },
                        [](const RkhsBallClass&) { return std::string("rkhs_ball"); },
                        [](const GlmClass&) { return std::string("glm"); },
                        [](const FiniteClass&) { return std::string("finite"); },
                    },
                    variant);
}

NonparametricEntropy lipschitz1d_entropy(const Lipschitz1DClass& cls, double B) {
  const double w = cls.hi - cls.lo;
  return {std::log(3.0) * (2.0 * B * cls.L + w) + w, 1.0};
}

ParametricEntropy glm_entropy(const GlmClass& cls, double B) {
  return {2.0 * cls.d_x * cls.d_x, 2.0 * B * cls.C};
}

EntropyModel HypothesisClass::entropy() const {
  return std::visit(overloaded{
                        [&](const Lipschitz1DClass& c) -> EntropyModel {
                          return lipschitz1d_entropy(c, domain_bound);
                        },
                        [&](const RkhsBallClass& c) -> EntropyModel { return c.entropy; },
                        [&](const GlmClass& c) -> EntropyModel { return glm_entropy(c, domain_bound); },
                        [&](const FiniteClass& c) -> EntropyModel {
                          return FiniteEntropy{std::log(static_cast<double>(c.members.size()))};
                        },
                    },
                    variant);
}

void HypothesisClass::validate() const {
  if (!(domain_bound > 0.0)) throw std::invalid_argument("class: domain bound must be > 0");
  std::visit(overloaded{
                 [](const Lipschitz1DClass& c) {
                   if (!(c.L >= 0.0)) throw std::invalid_argument("lipschitz1d class: L must be >= 0");
                   if (!(c.hi >= c.lo)) throw std::invalid_argument("lipschitz1d class: empty value range");
                 },
                 [](const RkhsBallClass& c) {
                   if (!(c.radius > 0.0)) throw std::invalid_argument("rkhs class: radius must be > 0");
                   if (!(c.kernel.bandwidth > 0.0))
                     throw std::invalid_argument("rkhs class: bandwidth must be > 0");
                   nplse::validate(EntropyModel{c.entropy});
                 },
                 [](const GlmClass& c) {
                   if (!(c.C >= 0.0)) throw std::invalid_argument("glm class: C must be >= 0");
                   if (c.d_x < 1) throw std::invalid_argument("glm class: d_x must be >= 1");
                 },
                 [](const FiniteClass& c) {
                   if (c.members.empty()) throw std::invalid_argument("finite class: no members");
                 },
             },
             variant);
}

Samples uniform_grid(double B, int n) {
  if (n < 1) throw std::invalid_argument("uniform_grid: need at least one point");
  Samples g(n, 1);
  if (n == 1) g(0, 0) = 0.0;
  else g.col(0) = Vec::LinSpaced(n, -B, B);
  return g;
}

double sup_distance(const Function& f, const Function& g, const Samples& grid) {
  if (grid.rows() == 0) throw std::invalid_argument("sup_distance: empty grid");
  Vec a(f.output_dim()), b(g.output_dim());
  double best = 0.0;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    f.evaluate(grid.row(i).transpose(), a);
    g.evaluate(grid.row(i).transpose(), b);
    best = std::max(best, (a - b).norm());
  }
  return best;
}

namespace {

struct StaircaseGrid {
  bool single = false;  // delta covers the whole range with the midpoint
  int nodes = 1;        // number of x nodes
  int levels = 1;       // number of value levels
  double h = 0.0;       // node spacing
};

StaircaseGrid staircase_grid(double L, double B, double lo, double hi, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("lipschitz cover: delta must be > 0");
  if (!(hi >= lo)) throw std::invalid_argument("lipschitz cover: empty value range");
  if (!(L >= 0.0) || !(B > 0.0)) throw std::invalid_argument("lipschitz cover: need L >= 0, B > 0");
  StaircaseGrid g;
  const double w = hi - lo;
  if (delta >= w / 2.0) {
    g.single = true;
    return g;
  }
  g.levels = static_cast<int>(std::ceil(w / delta - 1e-12)) + 1;
  if (L > 0.0) {
    g.h = delta / L;
    g.nodes = static_cast<int>(std::ceil(2.0 * B / g.h - 1e-12)) + 1;
  }
  return g;
}

// Number of sequences of `nodes` levels in [0, levels) with steps in {-1, 0, 1}.
double staircase_count(int nodes, int levels) {
  std::vector<double> cur(levels, 1.0), next(levels);
  for (int k = 1; k < nodes; ++k) {
    for (int j = 0; j < levels; ++j) {
      next[j] = cur[j];
      if (j > 0) next[j] += cur[j - 1];
      if (j + 1 < levels) next[j] += cur[j + 1];
    }
    std::swap(cur, next);
  }
  double total = 0.0;
  for (double c : cur) total += c;
  return total;
}

}  // namespace

double lipschitz1d_cover_size(double L, double B, double lo, double hi, double delta) {
  const StaircaseGrid g = staircase_grid(L, B, lo, hi, delta);
  return g.single ? 1.0 : staircase_count(g.nodes, g.levels);
}

Function random_lipschitz_function(Stream& rng, double L, double B, double lo, double hi,
                                   int pieces) {
  Vec knots = Vec::LinSpaced(pieces + 1, -B, B);
  Vec values(pieces + 1);
  values[0] = 0.0;
  for (int i = 1; i <= pieces; ++i)
    values[i] = values[i - 1] + rng.uniform(-L, L) * (knots[i] - knots[i - 1]);
  const double vmin = values.minCoeff(), vmax = values.maxCoeff();
  const double slack = (hi - lo) - (vmax - vmin);
  // A negative slack shifts part of the walk outside the range; clamping keeps it L-Lipschitz.
  const double shift = lo - vmin + rng.uniform() * slack;
  values = (values.array() + shift).cwiseMax(lo).cwiseMin(hi).matrix();
  return piecewise_linear(std::move(knots), std::move(values));
}

Cover build_cover_lipschitz1d(double L, double B, double lo, double hi, double delta, double cap,
                              std::uint64_t certify_seed) {
  const StaircaseGrid g = staircase_grid(L, B, lo, hi, delta);
  Cover cover;
  cover.delta = delta;
  cover.method = "lipschitz1d_staircase";
  Stream rng = Stream(certify_seed).fork("certify");
  const int n_members = 100;

  if (g.single) {
    cover.elements.push_back(constant_function(0.5 * (lo + hi)));
    const Samples grid = uniform_grid(B, 512);
    for (int i = 0; i < n_members; ++i) {
      Function f = random_lipschitz_function(rng, L, B, lo, hi);
      cover.certified_distance = std::max(cover.certified_distance, sup_distance(f, cover.elements[0], grid));
    }
    cover.certified_members = n_members;
    cover.certificate_grid = "uniform 512 points on [-B, B]";
    if (cover.certified_distance > delta * (1.0 + kCertifyTolerance))
      throw std::logic_error("lipschitz cover certification failed");
    return cover;
  }

  const double size = staircase_count(g.nodes, g.levels);
  if (size > cap)
    throw CapExceededError("lipschitz cover: " + fmt(size) + " elements exceed the cap of " + fmt(cap),
                           size, cap);

  Vec knots(g.nodes);
  for (int k = 0; k < g.nodes; ++k) knots[k] = -B + k * g.h;

  std::map<std::vector<int>, int> index;
  std::vector<int> seq(g.nodes);
  cover.elements.reserve(static_cast<std::size_t>(size));
  auto emit = [&]() {
    Vec values(g.nodes);
    for (int k = 0; k < g.nodes; ++k) values[k] = lo + seq[k] * delta;
    index.emplace(seq, static_cast<int>(cover.elements.size()));
    cover.elements.push_back(g.nodes == 1 ? constant_function(values[0]) : piecewise_linear(knots, values));
  };
  auto dfs = [&](auto&& self, int k) -> void {
    if (k == g.nodes) {
      emit();
      return;
    }
    const int prev = seq[k - 1];
    for (int j = std::max(0, prev - 1); j <= std::min(g.levels - 1, prev + 1); ++j) {
      seq[k] = j;
      self(self, k + 1);
    }
  };
  for (int j0 = 0; j0 < g.levels; ++j0) {
    seq[0] = j0;
    dfs(dfs, 1);
  }

  // Certificate: round each sampled member to the nearest level at every
  // node; the resulting staircase must be in the cover and within delta.
  const int fine = std::max(2, 10 * (g.nodes - 1) + 1);
  const Samples grid = uniform_grid(B, fine);
  for (int i = 0; i < n_members; ++i) {
    Function f = random_lipschitz_function(rng, L, B, lo, hi);
    for (int k = 0; k < g.nodes; ++k) {
      const double v = f(std::min(knots[k], B));
      seq[k] = static_cast<int>(std::floor((v - lo) / delta + 0.5));
    }
    auto it = index.find(seq);
    if (it == index.end()) throw std::logic_error("lipschitz cover certification: member not covered");
    const double d = sup_distance(f, cover.elements[it->second], grid);
    cover.certified_distance = std::max(cover.certified_distance, d);
  }
  cover.certified_members = n_members;
  cover.certificate_grid = "uniform " + std::to_string(fine) + " points on [-B, B]";
  if (cover.certified_distance > delta * (1.0 + kCertifyTolerance))
    throw std::logic_error("lipschitz cover certification failed");
  return cover;
}

Cover build_cover_glm(int d_x, double C, double B, Link link, double delta, double cap,
                      std::uint64_t certify_seed) {
  if (!(delta > 0.0)) throw std::invalid_argument("glm cover: delta must be > 0");
  if (d_x < 1 || !(C >= 0.0) || !(B > 0.0))
    throw std::invalid_argument("glm cover: need d_x >= 1, C >= 0, B > 0");
  Cover cover;
  cover.delta = delta;
  cover.method = "glm_frobenius_lattice";
  const int d = d_x;
  const int n_entries = d * d;

  if (C == 0.0) {
    cover.elements.push_back(glm_function(Mat::Zero(d, d), link));
    cover.certificate_grid = "exact (single member)";
    return cover;
  }

  const double required = std::pow(1.0 + 2.0 * C * B * std::sqrt(static_cast<double>(d)) / delta, n_entries);
  if (required > cap)
    throw CapExceededError("glm cover: lattice size " + fmt(required) + " exceeds the cap of " + fmt(cap),
                           required, cap);

  // Nearest-point rounding moves each entry by at most s/2, so the operator
  // norm error is at most d s / 2 and the sup error over the B-ball at most
  // B d s / 2 <= delta.
  const double s = std::min(delta / B, 2.0 * delta / (B * d));
  const int n = static_cast<int>(std::floor(C / s + 0.5));

  std::map<std::vector<int>, int> index;
  std::vector<int> cell(n_entries);
  auto dfs = [&](auto&& self, int e, double partial) -> void {
    if (e == n_entries) {
      Mat a(d, d);
      for (int i = 0; i < n_entries; ++i) a(i / d, i % d) = cell[i] * s;
      index.emplace(cell, static_cast<int>(cover.elements.size()));
      cover.elements.push_back(glm_function(std::move(a), link));
      if (static_cast<double>(cover.elements.size()) > cap)
        throw CapExceededError("glm cover: enumeration exceeded the cap", cover.elements.size(), cap);
      return;
    }
    for (int j = -n; j <= n; ++j) {
      const double gap = std::max(std::abs(j * s) - s / 2.0, 0.0);
      const double next = partial + gap * gap;
      if (next > C * C) continue;
      cell[e] = j;
      self(self, e + 1, next);
    }
  };
  dfs(dfs, 0, 0.0);

  Stream rng = Stream(certify_seed).fork("certify");
  const int n_members = 100;
  for (int i = 0; i < n_members; ++i) {
    const Vec flat = uniform_in_ball(rng, n_entries, C);
    Mat a(d, d);
    for (int k = 0; k < n_entries; ++k) {
      a(k / d, k % d) = flat[k];
      cell[k] = static_cast<int>(std::lround(flat[k] / s));
    }
    auto it = index.find(cell);
    if (it == index.end()) throw std::logic_error("glm cover certification: member not covered");
    const Mat& rep = cover.elements[it->second].as<GlmMap>()->matrix();
    Eigen::JacobiSVD<Mat> svd(a - rep);
    cover.certified_distance = std::max(cover.certified_distance, B * svd.singularValues()[0]);
  }
  cover.certified_members = n_members;
  cover.certificate_grid = "B * operator norm of the matrix difference (exact sup bound)";
  if (cover.certified_distance > delta * (1.0 + kCertifyTolerance))
    throw std::logic_error("glm cover certification failed");
  return cover;
}

Quantized quantize(const Function& f, const Cover& cover, const Samples& grid) {
  if (cover.elements.empty()) throw std::invalid_argument("quantize: empty cover");
  Quantized best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cover.elements.size(); ++i) {
    const double d = sup_distance(f, cover.elements[i], grid);
    if (d < best.distance) {
      best.distance = d;
      best.index = static_cast<int>(i);
    }
  }
  best.element = cover.elements[best.index];
  return best;
}

void write_cover(std::ostream& os, const Cover& cover, const Samples& grid) {
  os << "# cover method=" << cover.method << " delta=" << fmt(cover.delta)
     << " size=" << cover.elements.size() << "\n";
  os << "# certificate members=" << cover.certified_members
     << " max_distance=" << fmt(cover.certified_distance) << " grid=" << cover.certificate_grid << "\n";
  const int d_in = static_cast<int>(grid.cols());
  const int d_out = cover.elements.empty() ? 0 : cover.elements[0].output_dim();
  for (int j = 0; j < d_in; ++j) os << (j ? "," : "") << "x" << j;
  for (std::size_t e = 0; e < cover.elements.size(); ++e)
    for (int j = 0; j < d_out; ++j) os << ",e" << e << (d_out > 1 ? "_" + std::to_string(j) : "");
  os << "\n";
  Vec out(d_out);
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (int j = 0; j < d_in; ++j) os << (j ? "," : "") << fmt(grid(i, j));
    for (const auto& e : cover.elements) {
      e.evaluate(grid.row(i).transpose(), out);
      for (int j = 0; j < d_out; ++j) os << "," << fmt(out[j]);
    }
    os << "\n";
  }
}

}  // namespace nplse
