#pragma once

#include "nplse/bounds.hpp"
#include "nplse/dynamics.hpp"
#include "nplse/hypothesis.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nplse {

/// Thrown for unparseable or invalid configuration documents; the message
/// names the key and, when known, the line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TruthConfig {
  /// zero | linear | sine | sine_tabulated | glm | glm_random | rkhs_random | tabulated
  std::string type = "sine";
  double scale = 0.7;
  std::string link = "tanh";
  std::vector<std::vector<double>> matrix;
  double op_norm = 0.8;
  int k = 500;
  double rho = 0.9;
  double bandwidth = 1.0;
  std::vector<double> knots;
  std::vector<double> values;
};

struct SystemConfig {
  std::string kind = "autoregressive";  ///< autoregressive | time_series
  TruthConfig truth;
  int d_x = 1;
  int d_y = 1;
  double noise_sigma = 0.1;
  double noise_truncation = 0.0;
  double state_bound = 1.0;
  std::string init = "origin";  ///< origin | uniform_ball | point
  std::vector<double> init_point;
  int burn_in = 0;
  double covariate_sigma = 0.0;
  double covariate_scale = 0.0;  ///< covariate chain x -> scale * x + v
};

struct ClassConfig {
  std::string type = "lipschitz1d";  ///< lipschitz1d | rkhs_ball | glm | finite
  double L = 1.0;
  double lo = -1.0;
  double hi = 1.0;
  /// rkhs_ball radius; "truth" in the document means the truth's Hilbert norm.
  std::optional<double> radius;
  double bandwidth = 1.0;
  RkhsEntropy entropy;
  std::string link = "tanh";
  double C = 1.0;
  int size = 16;
  double perturbation = 0.3;
};

struct SweepConfig {
  std::vector<int> T{128, 256, 512};
  int replicates = 1;
  int n_fresh = 200;
  int systems = 1;
  /// Trajectories per empirical variance-proxy estimate; 0 skips it.
  int sigma_reps = 0;
};

struct BoundsConfig {
  BoundConstants constants;
  std::optional<double> gamma;
  std::optional<double> delta;
  std::optional<double> alpha;
  /// Contraction constant used for the variance proxy; estimated from the
  /// truth when absent.
  std::optional<double> L_star;
};

struct OutputConfig {
  std::string dir = ".";
  std::string prefix = "nplse";
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  int threads = 1;
  SystemConfig system;
  ClassConfig cls;
  SweepConfig sweep;
  BoundsConfig bounds;
  OutputConfig output;
};

/// Keys present in the document override the corresponding fields of `base`.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>",
                              const ExperimentConfig& base = {});
ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base = {});
/// Normalized document; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& config);

/// Builds the system described by the config; random truths draw from the
/// "truth" stream of `seed`.
SystemSpec build_system(const SystemConfig& config, std::uint64_t seed);
HypothesisClass build_class(const ClassConfig& config, const SystemSpec& system, std::uint64_t seed);

/// Finite class of `size` tabulated 1-D functions: the truth at a random
/// index and truth + perturbation * (random 1-Lipschitz bump) elsewhere.
/// A tabulated truth is included as is; any other truth is tabulated on the
/// knots, so it is only approximately a member.
FiniteClass make_finite_class(const Function& truth, double B, int size, double perturbation, std::uint64_t seed,
                              int knots = 65);

/// d x d standard normal matrix rescaled to the given operator norm.
Mat random_matrix_with_op_norm(int d, double op_norm, std::uint64_t seed);

}  // namespace nplse
