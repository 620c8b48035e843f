#pragma once

#include "nplse/function.hpp"
#include "nplse/rng.hpp"
#include "nplse/types.hpp"

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace nplse {

// Metric-entropy models: upper bounds on log N(F, sup-norm, delta).

/// p * delta^-q
struct NonparametricEntropy {
  double p = 1.0;
  double q = 1.0;
};
/// p * log(1 + c / delta)
struct ParametricEntropy {
  double p = 1.0;
  double c = 1.0;
};
/// prefactor * (delta/A)^(-1/alpha) * log(1 + lambda_1 A^(1+1/(2 alpha)) / delta^(1+1/(2 alpha)))
struct RkhsEntropy {
  double A = 1.0;
  double alpha = 1.0;
  double lambda_1 = 1.0;
  double prefactor = 1.0;
};
/// log |F|, constant in delta
struct FiniteEntropy {
  double log_cardinality = 0.0;
};

using EntropyModel = std::variant<NonparametricEntropy, ParametricEntropy, RkhsEntropy, FiniteEntropy>;

void validate(const EntropyModel& model);
double log_covering_bound(const EntropyModel& model, double delta);
std::string describe(const EntropyModel& model);

// Hypothesis classes.

struct Lipschitz1DClass {
  double L = 1.0;
  double lo = -1.0;
  double hi = 1.0;
};

struct RkhsBallClass {
  GaussianKernel kernel;
  double radius = 1.0;  ///< may be +infinity
  int d_x = 1;
  int d_y = 1;
  RkhsEntropy entropy;
};

struct GlmClass {
  Link link = Link::Tanh;
  double C = 1.0;  ///< Frobenius bound
  int d_x = 1;
};

struct FiniteClass {
  std::vector<Function> members;
};

struct HypothesisClass {
  std::variant<Lipschitz1DClass, RkhsBallClass, GlmClass, FiniteClass> variant;
  double domain_bound = 1.0;

  std::string tag() const;
  EntropyModel entropy() const;
  void validate() const;
};

/// Entropy model for the Lipschitz ball that dominates the staircase cover
/// size for delta up to the range width (q = 1).
NonparametricEntropy lipschitz1d_entropy(const Lipschitz1DClass& cls, double B);
ParametricEntropy glm_entropy(const GlmClass& cls, double B);

// Covers.

struct Cover {
  double delta = 0.0;
  std::vector<Function> elements;
  std::string method;
  /// Certificate: number of sampled class members checked, the largest
  /// distance to their assigned element, and the points it was measured on.
  int certified_members = 0;
  double certified_distance = 0.0;
  std::string certificate_grid;
};

constexpr double kDefaultCoverCap = 1e6;

/// Uniform 1-D grid of n points on [-B, B], one point per row.
Samples uniform_grid(double B, int n = 512);

double sup_distance(const Function& f, const Function& g, const Samples& grid);

/// Number of node-value sequences in the staircase cover, without building it.
double lipschitz1d_cover_size(double L, double B, double lo, double hi, double delta);

Cover build_cover_lipschitz1d(double L, double B, double lo, double hi, double delta,
                              double cap = kDefaultCoverCap, std::uint64_t certify_seed = 0);

Cover build_cover_glm(int d_x, double C, double B, Link link, double delta,
                      double cap = kDefaultCoverCap, std::uint64_t certify_seed = 0);

/// Random L-Lipschitz function on [-B, B] with values in [lo, hi].
Function random_lipschitz_function(Stream& rng, double L, double B, double lo, double hi,
                                   int pieces = 64);

struct Quantized {
  int index = 0;
  Function element;
  double distance = 0.0;
};

/// Cover element closest to f on the grid; ties go to the lowest index.
Quantized quantize(const Function& f, const Cover& cover, const Samples& grid);

/// Columnar text: '#' metadata lines, then one row per grid point with the
/// grid coordinates followed by each element's outputs.
void write_cover(std::ostream& os, const Cover& cover, const Samples& grid);

}  // namespace nplse
