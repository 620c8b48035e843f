#include "nplse/bounds.hpp"

#include "nplse/csv.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace nplse {
namespace {

bool is_finite_model(const EntropyModel& m) { return std::holds_alternative<FiniteEntropy>(m); }

// log N at scale s; finite classes accept s = 0.
double log_n(const EntropyModel& m, double s, const char* what) {
  if (const auto* f = std::get_if<FiniteEntropy>(&m)) return f->log_cardinality;
  if (!(s > 0.0)) throw std::invalid_argument(std::string("master_bound: ") + what + " must be > 0");
  return log_covering_bound(m, s);
}

// Whether the integral of sqrt(log N) diverges at 0.
bool diverges_at_zero(const EntropyModel& m) {
  if (const auto* n = std::get_if<NonparametricEntropy>(&m)) return n->q >= 2.0;
  if (const auto* r = std::get_if<RkhsEntropy>(&m)) return r->alpha <= 0.5;
  return false;
}

void check_interval(double alpha, double gamma) {
  if (!(alpha >= 0.0) || !(gamma >= alpha) || !std::isfinite(gamma))
    throw std::invalid_argument("entropy_integral: need 0 <= alpha <= gamma < inf");
}

}  // namespace

double entropy_integral_quadrature(const EntropyModel& model, double alpha, double gamma) {
  validate(model);
  check_interval(alpha, gamma);
  if (alpha == gamma) return 0.0;
  if (alpha == 0.0 && diverges_at_zero(model))
    throw DivergenceError("entropy integral diverges at 0 for " + describe(model) + "; use alpha > 0");
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto integrand = [&](double s) {
    if (!(s > 0.0)) s = std::numeric_limits<double>::min();
    // Abscissas next to an integrable singularity at 0 can overflow log N;
    // the mass below the overflow point is far under double precision.
    const double v = std::sqrt(log_covering_bound(model, s));
    return std::isfinite(v) ? v : 0.0;
  };
  return integrator.integrate(integrand, alpha, gamma, 1e-9);
}

double entropy_integral(const EntropyModel& model, double alpha, double gamma) {
  validate(model);
  check_interval(alpha, gamma);
  if (alpha == gamma) return 0.0;
  if (const auto* n = std::get_if<NonparametricEntropy>(&model)) {
    if (alpha == 0.0 && n->q >= 2.0)
      throw DivergenceError("entropy integral diverges at 0 for q >= 2; use alpha > 0");
    if (n->q == 2.0) return std::sqrt(n->p) * std::log(gamma / alpha);
    const double e = 1.0 - n->q / 2.0;
    return std::sqrt(n->p) * (2.0 / (2.0 - n->q)) * (std::pow(gamma, e) - std::pow(alpha, e));
  }
  if (const auto* f = std::get_if<FiniteEntropy>(&model))
    return std::sqrt(f->log_cardinality) * (gamma - alpha);
  return entropy_integral_quadrature(model, alpha, gamma);
}

MasterTerms master_terms(const BoundInputs& in) {
  validate(in.entropy);
  if (!(in.T > 0.0)) throw std::invalid_argument("master_bound: T must be > 0");
  if (!(in.sigma_w >= 0.0) || !(in.sigma_T_sq >= 0.0))
    throw std::invalid_argument("master_bound: sigma_w and sigma_T_sq must be >= 0");
  if (!(in.delta >= 0.0) || !(in.gamma >= 0.0) || !(in.alpha_trunc >= 0.0))
    throw std::invalid_argument("master_bound: radii must be >= 0");
  if (in.alpha_trunc > in.gamma) throw std::invalid_argument("master_bound: alpha must not exceed gamma");
  if (in.d_y < 1) throw std::invalid_argument("master_bound: d_y must be >= 1");

  MasterTerms t;
  if (in.sigma_w > 0.0) {
    t.noise_entropy = 8.0 * in.sigma_w * in.sigma_w * log_n(in.entropy, in.gamma, "gamma") / in.T;
    t.truncation = 128.0 * in.alpha_trunc * in.sigma_w * std::sqrt(static_cast<double>(in.d_y));
    t.chaining = 64.0 * in.sigma_w / std::sqrt(in.T) * entropy_integral(in.entropy, in.alpha_trunc, in.gamma);
  }
  t.quantization = 3.0 * in.delta;
  if (in.sigma_T_sq > 0.0) t.proxy = std::sqrt(2.0 * in.sigma_T_sq * log_n(in.entropy, in.delta, "delta"));
  t.total = std::sqrt(t.noise_entropy + t.truncation + t.chaining) + t.quantization + t.proxy;
  return t;
}

double master_bound(const BoundInputs& in) { return master_terms(in).total; }

RateResult nonparametric_rate(double p, double q, double sigma_w, double T, double sigma_T_sq, int d_y) {
  if (!(q < 2.0)) throw std::invalid_argument("nonparametric_rate: q >= 2, use heavy_rate");
  if (!(p > 0.0) || !(q > 0.0)) throw std::invalid_argument("nonparametric_rate: need p, q > 0");
  RateResult r;
  r.gamma = std::pow(sigma_w * sigma_w * p / T, 1.0 / (2.0 + q));
  r.delta = std::pow(p * sigma_T_sq, 1.0 / (2.0 + q));
  BoundInputs in;
  in.sigma_w = sigma_w;
  in.T = T;
  in.d_y = d_y;
  in.entropy = NonparametricEntropy{p, q};
  in.sigma_T_sq = sigma_T_sq;
  in.gamma = r.gamma;
  in.delta = r.delta;
  in.alpha_trunc = 0.0;
  r.value = master_bound(in);
  r.asymptotic = std::sqrt(1.0 / (2.0 - q)) * std::pow(p * sigma_w * sigma_w / T, 1.0 / (2.0 + q)) +
                 std::pow(p * sigma_T_sq, 1.0 / (2.0 + q));
  return r;
}

double heavy_rate(double p, double q, double sigma_w, double T, int d_y, double sigma_T_sq,
                  const BoundConstants& k) {
  if (!(q > 2.0)) throw std::invalid_argument("heavy_rate: needs q > 2");
  const double dy = d_y;
  const double first = sigma_w * std::sqrt(dy) * std::pow(1.0 / (q - 2.0), 1.0 / q) *
                       std::pow(p / (dy * T), 1.0 / (2.0 * q));
  return k.heavy * (first + std::pow(p * sigma_T_sq, 1.0 / (2.0 + q)));
}

double parametric_rate(double p, double c, double sigma_w, double T, int d_y, double sigma_T_sq,
                       const BoundConstants& k) {
  if (!(T >= 1.0)) throw std::invalid_argument("parametric_rate: T must be >= 1");
  const double noise = sigma_w * sigma_w * p *
                       std::log1p(c * std::sqrt(static_cast<double>(d_y)) * sigma_w * T * T) / T;
  const double proxy = sigma_T_sq * p * std::log1p(c * T);
  return k.parametric * (std::sqrt(noise) + std::sqrt(proxy) + 1.0 / T);
}

VarianceProxyBound sigma_contraction(double M, double m, double B, double L, double L_star, double T) {
  if (!(L_star < 1.0) || !(L_star >= 0.0))
    throw std::invalid_argument("sigma_contraction: needs 0 <= L_star < 1 (bound is vacuous otherwise)");
  if (!(M > 0.0) || !(m > 0.0) || !(B > 0.0) || !(L >= 0.0) || !(T > 0.0))
    throw std::invalid_argument("sigma_contraction: scales must be positive");
  const double gap = 1.0 - L_star;
  return {64.0 * M * M * B * B * L * L / (m * m * gap * gap * T), ContractionProvenance{M, m, B, L, L_star}};
}

VarianceProxyBound sigma_mixing(double B, double t_mix, double T, double c_mix) {
  if (!(t_mix >= 1.0)) throw std::invalid_argument("sigma_mixing: t_mix must be >= 1");
  if (!(T > 0.0)) throw std::invalid_argument("sigma_mixing: T must be > 0");
  return {c_mix * B * B * t_mix / T, MixingProvenance{B, t_mix, c_mix}};
}

VarianceProxyBound sigma_eiss(double L, double B, double b, double r, double T) {
  if (!(r < 1.0)) throw std::invalid_argument("sigma_eiss: needs r < 1");
  if (!(T > 0.0)) throw std::invalid_argument("sigma_eiss: T must be > 0");
  const double gap = 1.0 - r;
  return {64.0 * L * L * B * B * b * b / (gap * gap * T), EissProvenance{L, B, b, r}};
}

double finite_class_bound(double log_M, double sigma_w, double T, const ContractionProvenance& c,
                          const BoundConstants& k) {
  if (!(log_M >= 0.0)) throw std::invalid_argument("finite_class_bound: log_M must be >= 0");
  if (!(c.L_star < 1.0)) throw std::invalid_argument("finite_class_bound: needs L_star < 1");
  const double gap = 1.0 - c.L_star;
  return k.finite_noise * std::sqrt(sigma_w * sigma_w * log_M / T) +
         k.finite_proxy * std::sqrt(c.M * c.M * c.B * c.B * c.L * c.L * log_M / (c.m * c.m * gap * gap * T));
}

double gen_bound_lipschitz_loss(double L, double B, double b, double r_max, double T, double info_bound) {
  if (!(r_max < 1.0)) throw std::invalid_argument("gen_bound_lipschitz_loss: needs r_max < 1");
  if (!(info_bound >= 0.0)) throw std::invalid_argument("gen_bound_lipschitz_loss: information must be >= 0");
  const double gap = 1.0 - r_max;
  return std::sqrt(64.0 * L * L * B * B * b * b / (gap * gap * T) * info_bound);
}

namespace {

// Golden-section search for the minimum of f on [a, b].
template <class F>
double golden_min(F&& f, double a, double b, int iterations = 80) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

double safe(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

}  // namespace

Balanced balance(const EntropyModel& entropy, double sigma_w, double T, int d_y, double sigma_T_sq) {
  validate(entropy);
  BoundInputs base;
  base.sigma_w = sigma_w;
  base.T = T;
  base.d_y = d_y;
  base.entropy = entropy;
  base.sigma_T_sq = sigma_T_sq;

  // The bound splits into a (gamma, alpha) part and a delta part.
  auto noise_part = [&](double gamma, double alpha) {
    BoundInputs in = base;
    in.sigma_T_sq = 0.0;
    in.gamma = gamma;
    in.alpha_trunc = alpha;
    try {
      return safe(master_bound(in));
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto proxy_part = [&](double delta) {
    BoundInputs in = base;
    in.sigma_w = 0.0;
    in.delta = delta;
    try {
      return safe(master_bound(in));
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const bool finite = is_finite_model(entropy);
  const bool divergent = diverges_at_zero(entropy);
  const int n_grid = 241;
  const double log_lo = std::log(1e-12), log_hi = std::log(1e4);
  const double step = (log_hi - log_lo) / (n_grid - 1);
  auto grid_point = [&](int i) { return std::exp(log_lo + i * step); };

  Balanced out;

  // delta
  if (sigma_T_sq == 0.0 || finite) {
    out.delta = 0.0;
  } else {
    int best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_grid; ++i) {
      const double v = proxy_part(grid_point(i));
      if (v < best_v) {
        best_v = v;
        best = i;
      }
    }
    double ld = log_lo + best * step;
    for (int round = 0; round < 3; ++round)
      ld = golden_min([&](double l) { return proxy_part(std::exp(l)); }, ld - step, ld + step);
    out.delta = proxy_part(std::exp(ld)) <= best_v ? std::exp(ld) : grid_point(best);
  }

  // (gamma, alpha); alpha is parametrized as a fraction of gamma.
  if (sigma_w == 0.0 || finite) {
    out.gamma = out.alpha = 0.0;
  } else {
    std::vector<double> ratios;
    if (!divergent) ratios.push_back(0.0);
    for (int i = 0; i <= 48; ++i) ratios.push_back(std::pow(10.0, -12.0 + i * 0.25));
    double best_v = std::numeric_limits<double>::infinity();
    double bg = 1.0, br = 1.0;
    for (int i = 0; i < n_grid; ++i) {
      const double g = grid_point(i);
      for (double r : ratios) {
        const double v = noise_part(g, r * g);
        if (v < best_v) {
          best_v = v;
          bg = g;
          br = r;
        }
      }
    }
    // Closed-form choices from the rate theorems as extra candidates.
    std::vector<std::pair<double, double>> candidates;
    if (const auto* n = std::get_if<NonparametricEntropy>(&entropy); n && n->q < 2.0)
      candidates.push_back({std::pow(sigma_w * sigma_w * n->p / T, 1.0 / (2.0 + n->q)), 0.0});
    if (std::holds_alternative<ParametricEntropy>(entropy)) {
      const double a = 1.0 / (std::sqrt(static_cast<double>(d_y)) * sigma_w * T * T);
      candidates.push_back({a, 1.0});
    }
    for (auto [g, r] : candidates) {
      const double v = noise_part(g, r * g);
      if (v < best_v) {
        best_v = v;
        bg = g;
        br = r;
      }
    }
    double lg = std::log(bg);
    for (int round = 0; round < 3; ++round) {
      const double lg_new = golden_min([&](double l) { return noise_part(std::exp(l), br * std::exp(l)); },
                                       lg - step, lg + step);
      if (noise_part(std::exp(lg_new), br * std::exp(lg_new)) < best_v) {
        lg = lg_new;
        best_v = noise_part(std::exp(lg), br * std::exp(lg));
      }
      if (br > 0.0) {
        const double lr = std::log(br);
        const double lr_new = golden_min(
            [&](double l) { return noise_part(std::exp(lg), std::min(1.0, std::exp(l)) * std::exp(lg)); },
            lr - 0.6, std::min(0.0, lr + 0.6));
        const double r_new = std::min(1.0, std::exp(lr_new));
        if (noise_part(std::exp(lg), r_new * std::exp(lg)) < best_v) {
          br = r_new;
          best_v = noise_part(std::exp(lg), br * std::exp(lg));
        }
      }
    }
    out.gamma = std::exp(lg);
    out.alpha = br * out.gamma;
  }

  BoundInputs in = base;
  in.gamma = out.gamma;
  in.delta = out.delta;
  in.alpha_trunc = out.alpha;
  out.value = master_bound(in);
  return out;
}

void write_bound_report(std::ostream& os, const std::vector<BoundRow>& rows, const std::vector<std::string>& comments) {
  CsvTable t;
  t.comments = comments;
  t.header = {"name",  "sigma_w",       "T",          "d_y",     "entropy",   "sigma_T_sq", "gamma",      "delta",
              "alpha", "noise_entropy", "truncation", "chaining", "quantization", "proxy",    "total"};
  for (const auto& r : rows) {
    const auto& in = r.inputs;
    t.rows.push_back({r.name, format_double(in.sigma_w), format_double(in.T), std::to_string(in.d_y),
                      describe(in.entropy), format_double(in.sigma_T_sq), format_double(in.gamma),
                      format_double(in.delta), format_double(in.alpha_trunc), format_double(r.terms.noise_entropy),
                      format_double(r.terms.truncation), format_double(r.terms.chaining),
                      format_double(r.terms.quantization), format_double(r.terms.proxy), format_double(r.terms.total)});
  }
  write_csv(os, t);
}

}  // namespace nplse
