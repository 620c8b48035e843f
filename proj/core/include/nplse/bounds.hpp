#pragma once

#include "nplse/hypothesis.hpp"

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace nplse {

/// Multipliers for the constants the error bounds only state up to "<~".
struct BoundConstants {
  double heavy = 1.0;       ///< heavy-tailed entropy rate
  double parametric = 1.0;  ///< parametric rate
  double c_mix = 1.0;       ///< mixing-time variance proxy
  double finite_noise = 1.0;
  double finite_proxy = 1.0;
};

struct BoundInputs {
  double sigma_w = 0.0;
  double T = 1.0;
  int d_y = 1;
  EntropyModel entropy = FiniteEntropy{0.0};
  double sigma_T_sq = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double alpha_trunc = 0.0;
};

/// The master bound split into its pieces.
struct MasterTerms {
  double noise_entropy = 0.0;  ///< 8 sigma_w^2 log N(gamma) / T
  double truncation = 0.0;     ///< 128 alpha sigma_w sqrt(d_y)
  double chaining = 0.0;       ///< 64 (sigma_w / sqrt T) * integral
  double quantization = 0.0;   ///< 3 delta
  double proxy = 0.0;          ///< sqrt(2 sigma_T^2 log N(delta))
  double total = 0.0;
};

/// Integral of sqrt(log N(s)) over [alpha, gamma]. Throws DivergenceError
/// when the integral diverges at alpha = 0.
double entropy_integral(const EntropyModel& model, double alpha, double gamma);

/// Same integral by adaptive quadrature, bypassing any closed form.
double entropy_integral_quadrature(const EntropyModel& model, double alpha, double gamma);

MasterTerms master_terms(const BoundInputs& in);
double master_bound(const BoundInputs& in);

struct RateResult {
  double value = 0.0;       ///< master bound evaluated at the chosen radii
  double asymptotic = 0.0;  ///< closed-form leading-order expression
  double gamma = 0.0;
  double delta = 0.0;
};

RateResult nonparametric_rate(double p, double q, double sigma_w, double T, double sigma_T_sq, int d_y = 1);
double heavy_rate(double p, double q, double sigma_w, double T, int d_y, double sigma_T_sq,
                  const BoundConstants& k = {});
double parametric_rate(double p, double c, double sigma_w, double T, int d_y, double sigma_T_sq,
                       const BoundConstants& k = {});

struct ContractionProvenance {
  double M = 1.0, m = 1.0, B = 1.0, L = 1.0, L_star = 0.0;
};
struct MixingProvenance {
  double B = 1.0, t_mix = 1.0, c_mix = 1.0;
};
struct EissProvenance {
  double L = 1.0, B = 1.0, b = 1.0, r = 0.0;
};
struct EmpiricalProvenance {};

struct VarianceProxyBound {
  double value = 0.0;
  std::variant<ContractionProvenance, MixingProvenance, EissProvenance, EmpiricalProvenance> provenance;
};

VarianceProxyBound sigma_contraction(double M, double m, double B, double L, double L_star, double T);
VarianceProxyBound sigma_mixing(double B, double t_mix, double T, double c_mix = 1.0);
VarianceProxyBound sigma_eiss(double L, double B, double b, double r, double T);

double finite_class_bound(double log_M, double sigma_w, double T, const ContractionProvenance& c,
                          const BoundConstants& k = {});

double gen_bound_lipschitz_loss(double L, double B, double b, double r_max, double T, double info_bound);

struct Balanced {
  double gamma = 0.0;
  double delta = 0.0;
  double alpha = 0.0;
  double value = 0.0;
};

/// Numerical minimization of the master bound over (gamma, delta, alpha).
Balanced balance(const EntropyModel& entropy, double sigma_w, double T, int d_y, double sigma_T_sq);

/// One BoundReport row: inputs, radii, additive terms and total.
struct BoundRow {
  std::string name;
  BoundInputs inputs;
  MasterTerms terms;
};
void write_bound_report(std::ostream& os, const std::vector<BoundRow>& rows,
                        const std::vector<std::string>& comments = {});

}  // namespace nplse
