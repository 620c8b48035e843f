#pragma once

#include "nplse/function.hpp"
#include "nplse/rng.hpp"
#include "nplse/types.hpp"

#include <cstdint>
#include <vector>

namespace nplse {

enum class SystemKind {
  Autoregressive,  ///< y_t = x_{t+1} before projection
  TimeSeries,      ///< covariates follow their own chain; y_t is a separate output
};

struct InitialState {
  enum class Kind { Point, UniformBall };
  Kind kind = Kind::Point;
  Vec point;  ///< used when kind == Point; empty means the origin
};

struct SystemSpec {
  SystemKind kind = SystemKind::Autoregressive;
  Function truth;
  int d_x = 1;
  int d_y = 1;
  double noise_sigma = 0.0;
  /// Noise draws are redrawn until their norm is at most this radius.
  /// Nonpositive means 4 * noise_sigma.
  double noise_truncation = 0.0;
  double state_bound = 1.0;
  InitialState init;
  int burn_in = 0;

  /// TimeSeries covariate chain: x_{t+1} = proj(covariate_map(x_t) + v_t),
  /// v_t truncated Gaussian of scale covariate_sigma. An empty map means
  /// the covariates are i.i.d. draws of v_t.
  Function covariate_map;
  double covariate_sigma = 0.0;

  double truncation_radius() const;
  /// Throws std::invalid_argument describing the first violated requirement.
  void validate() const;
};

struct Trajectory {
  Samples states;   ///< T x d_x
  Samples outputs;  ///< T x d_y
  Samples noises;   ///< T x d_y
  std::uint64_t seed = 0;
  int T() const { return static_cast<int>(states.rows()); }
};

/// Euclidean projection onto the closed ball of the given radius.
void project_to_ball(Eigen::Ref<Vec> x, double radius);

Trajectory simulate(const SystemSpec& spec, int T, std::uint64_t seed);

struct CounterfactualDraw {
  Trajectory fresh;
  int tau = 0;
};

/// Seeds used for the i-th counterfactual draw; shared by both sampling routes.
std::uint64_t counterfactual_seed(std::uint64_t seed, int index);
int counterfactual_tau(std::uint64_t seed, int index, int T);

/// n_fresh independent fresh length-T trajectories, each with its own uniform
/// time index. The streams are derived from `seed` under names disjoint from
/// the ones simulate() uses, so a training trajectory simulated from the same
/// seed is independent of them.
std::vector<CounterfactualDraw> sample_counterfactual(const SystemSpec& spec, int T, int n_fresh,
                                                      std::uint64_t seed);

/// Just the states x'_tau of sample_counterfactual, simulating each fresh
/// trajectory only up to its index. Row i equals
/// sample_counterfactual(...)[i].fresh.states.row(tau_i).
Samples sample_counterfactual_states(const SystemSpec& spec, int T, int n_fresh,
                                     std::uint64_t seed);

/// Random system whose truth is rho * Theta^T K(eta, .) / |Theta|_op with
/// standard normal eta (d_x x k) and Theta (k x d_x).
struct RkhsSystemOptions {
  double kernel_bandwidth = 1.0;
  double noise_sigma = 0.1;
  double state_bound = 10.0;
  int burn_in = 1000;
};
SystemSpec make_random_rkhs_system(int d_x, int k, double rho, std::uint64_t seed,
                                   const RkhsSystemOptions& options = {});

/// Largest observed ratio |f(x) - f(z)| / |x - z| over pairs drawn uniformly
/// from the B-ball. A lower bound on the Lipschitz constant.
double contraction_estimate(const Function& truth, double B, int n_pairs, std::uint64_t seed);

struct MixingOptions {
  int n_bins = 50;
  int horizon = 200;
  int n_chains = 2000;
};

/// Histogram estimate of the mixing time of a one-dimensional state chain.
/// Returns horizon + 1 if the TV distance never drops to 1/4.
int mixing_time_estimate(const SystemSpec& spec, const MixingOptions& options, std::uint64_t seed);

/// Exact mixing time of a finite row-stochastic transition matrix with TV
/// threshold 1/4; returns max_t + 1 if not reached by max_t.
int exact_mixing_time(const Mat& transition, int max_t = 100000);

}  // namespace nplse
