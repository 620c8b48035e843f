#include "nplse/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nplse {
namespace {

// Advances a system one step at a time from the streams simulate() uses.
class Stepper {
 public:
  Stepper(const SystemSpec& spec, std::uint64_t seed)
      : spec_(spec),
        noise_(Stream(seed).fork("noise")),
        covariate_(Stream(seed).fork("covariate")),
        x_(spec.d_x),
        fx_(spec.d_y),
        w_(spec.d_y),
        radius_(spec.truncation_radius()),
        covariate_radius_(4.0 * spec.covariate_sigma) {
    Stream init = Stream(seed).fork("init");
    if (spec.init.kind == InitialState::Kind::UniformBall) {
      x_ = uniform_in_ball(init, spec.d_x, spec.state_bound);
    } else if (spec.init.point.size() == 0) {
      x_.setZero();
    } else {
      x_ = spec.init.point;
      project_to_ball(x_, spec.state_bound);
    }
  }

  Stepper(const SystemSpec& spec, std::uint64_t seed, VecRef start) : Stepper(spec, seed) {
    x_ = start;
  }

  const Vec& state() const { return x_; }
  const Vec& output() const { return fx_; }
  const Vec& noise() const { return w_; }

  // Draws w_t, sets y_t = f(x_t) + w_t (in fx_ after the call) and moves to x_{t+1}.
  void step() {
    spec_.truth.evaluate(x_, fx_);
    w_ = truncated_gaussian(noise_, spec_.d_y, spec_.noise_sigma, radius_);
    fx_ += w_;
    if (spec_.kind == SystemKind::Autoregressive) {
      x_ = fx_;
    } else {
      Vec v = truncated_gaussian(covariate_, spec_.d_x, spec_.covariate_sigma, covariate_radius_);
      if (spec_.covariate_map.valid()) x_ = spec_.covariate_map(x_) + v;
      else x_ = v;
    }
    project_to_ball(x_, spec_.state_bound);
  }

 private:
  const SystemSpec& spec_;
  Stream noise_;
  Stream covariate_;
  Vec x_;
  Vec fx_;
  Vec w_;
  double radius_;
  double covariate_radius_;
};

Vec state_at(const SystemSpec& spec, std::uint64_t seed, int t) {
  Stepper s(spec, seed);
  for (int i = 0; i < spec.burn_in + t; ++i) s.step();
  return s.state();
}

int bin_of(double x, double B, int n_bins) {
  const int b = static_cast<int>(std::floor((x + B) / (2.0 * B) * n_bins));
  return std::clamp(b, 0, n_bins - 1);
}

}  // namespace

double SystemSpec::truncation_radius() const {
  return noise_truncation > 0.0 ? noise_truncation : 4.0 * noise_sigma;
}

void SystemSpec::validate() const {
  if (!truth.valid()) throw std::invalid_argument("system: truth function missing");
  if (d_x < 1 || d_y < 1) throw std::invalid_argument("system: dimensions must be positive");
  if (truth.input_dim() != d_x || truth.output_dim() != d_y)
    throw std::invalid_argument("system: truth dimensions do not match d_x/d_y");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("system: noise_sigma must be >= 0");
  if (!(state_bound > 0.0)) throw std::invalid_argument("system: state_bound must be > 0");
  if (burn_in < 0) throw std::invalid_argument("system: burn_in must be >= 0");
  if (kind == SystemKind::Autoregressive && d_y != d_x)
    throw std::invalid_argument("system: autoregressive systems need d_y == d_x");
  if (noise_sigma > 0.0 && !(truncation_radius() > 0.0))
    throw std::invalid_argument("system: noise truncation radius must be > 0");
  if (!(covariate_sigma >= 0.0)) throw std::invalid_argument("system: covariate_sigma must be >= 0");
  if (covariate_map.valid() &&
      (covariate_map.input_dim() != d_x || covariate_map.output_dim() != d_x))
    throw std::invalid_argument("system: covariate map must be d_x -> d_x");
  if (init.kind == InitialState::Kind::Point && init.point.size() != 0 && init.point.size() != d_x)
    throw std::invalid_argument("system: initial point has wrong dimension");
}

void project_to_ball(Eigen::Ref<Vec> x, double radius) {
  const double n = x.norm();
  if (n > radius) x *= radius / n;
}

Trajectory simulate(const SystemSpec& spec, int T, std::uint64_t seed) {
  spec.validate();
  if (T < 1) throw std::invalid_argument("simulate: T must be >= 1");
  Trajectory traj;
  traj.seed = seed;
  traj.states.resize(T, spec.d_x);
  traj.outputs.resize(T, spec.d_y);
  traj.noises.resize(T, spec.d_y);
  Stepper s(spec, seed);
  for (int i = 0; i < spec.burn_in; ++i) s.step();
  for (int t = 0; t < T; ++t) {
    traj.states.row(t) = s.state().transpose();
    s.step();
    traj.outputs.row(t) = s.output().transpose();
    traj.noises.row(t) = s.noise().transpose();
  }
  return traj;
}

std::uint64_t counterfactual_seed(std::uint64_t seed, int index) {
  Stream s = Stream(seed).fork("fresh").fork(static_cast<std::uint64_t>(index));
  return s();
}

int counterfactual_tau(std::uint64_t seed, int index, int T) {
  Stream s = Stream(seed).fork("tau").fork(static_cast<std::uint64_t>(index));
  return static_cast<int>(s.below(static_cast<std::uint64_t>(T)));
}

std::vector<CounterfactualDraw> sample_counterfactual(const SystemSpec& spec, int T, int n_fresh,
                                                      std::uint64_t seed) {
  if (n_fresh < 1) throw std::invalid_argument("sample_counterfactual: n_fresh must be >= 1");
  std::vector<CounterfactualDraw> draws;
  draws.reserve(n_fresh);
  for (int i = 0; i < n_fresh; ++i)
    draws.push_back({simulate(spec, T, counterfactual_seed(seed, i)), counterfactual_tau(seed, i, T)});
  return draws;
}

Samples sample_counterfactual_states(const SystemSpec& spec, int T, int n_fresh,
                                     std::uint64_t seed) {
  spec.validate();
  if (n_fresh < 1) throw std::invalid_argument("sample_counterfactual: n_fresh must be >= 1");
  if (T < 1) throw std::invalid_argument("sample_counterfactual: T must be >= 1");
  Samples out(n_fresh, spec.d_x);
  for (int i = 0; i < n_fresh; ++i)
    out.row(i) =
        state_at(spec, counterfactual_seed(seed, i), counterfactual_tau(seed, i, T)).transpose();
  return out;
}

SystemSpec make_random_rkhs_system(int d_x, int k, double rho, std::uint64_t seed,
                                   const RkhsSystemOptions& options) {
  if (d_x < 1 || k < 1) throw std::invalid_argument("random rkhs system: need d_x >= 1, k >= 1");
  if (!(rho >= 0.0)) throw std::invalid_argument("random rkhs system: rho must be >= 0");
  Stream eta_stream = Stream(seed).fork("eta");
  Stream theta_stream = Stream(seed).fork("theta");
  // eta is d_x x k; stored transposed, one center per row.
  Samples centers(k, d_x);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d_x; ++i) centers(j, i) = eta_stream.normal();
  Mat theta(k, d_x);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < d_x; ++j) theta(i, j) = theta_stream.normal();
  // Operator norm from the small Gram matrix Theta^T Theta.
  Eigen::SelfAdjointEigenSolver<Mat> eig(theta.transpose() * theta);
  const double op = std::sqrt(eig.eigenvalues().maxCoeff());
  Mat coeffs = op > 0.0 ? Mat(theta * (rho / op)) : Mat::Zero(k, d_x);

  SystemSpec spec;
  spec.kind = SystemKind::Autoregressive;
  spec.d_x = spec.d_y = d_x;
  spec.truth = kernel_expansion(std::move(centers), std::move(coeffs),
                                GaussianKernel{options.kernel_bandwidth});
  spec.noise_sigma = options.noise_sigma;
  spec.state_bound = options.state_bound;
  spec.burn_in = options.burn_in;
  return spec;
}

double contraction_estimate(const Function& truth, double B, int n_pairs, std::uint64_t seed) {
  if (n_pairs < 1) throw std::invalid_argument("contraction_estimate: n_pairs must be >= 1");
  Stream rng(seed);
  const int d = truth.input_dim();
  double best = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    Vec x = uniform_in_ball(rng, d, B);
    Vec z = uniform_in_ball(rng, d, B);
    while ((x - z).norm() == 0.0) z = uniform_in_ball(rng, d, B);
    best = std::max(best, (truth(x) - truth(z)).norm() / (x - z).norm());
  }
  return best;
}

int mixing_time_estimate(const SystemSpec& spec, const MixingOptions& options, std::uint64_t seed) {
  spec.validate();
  if (spec.d_x != 1) throw std::invalid_argument("mixing_time_estimate: only d_x = 1 is supported");
  if (options.n_bins < 2) throw std::invalid_argument("mixing_time_estimate: n_bins must be >= 2");
  if (options.horizon < 1 || options.n_chains < 1)
    throw std::invalid_argument("mixing_time_estimate: horizon and n_chains must be >= 1");
  const double B = spec.state_bound;
  const int nb = options.n_bins;
  const int H = options.horizon;

  SystemSpec ref_spec = spec;
  ref_spec.burn_in = std::max(spec.burn_in, H);
  const Trajectory ref = simulate(ref_spec, 100 * H, Stream(seed).fork("reference")());
  Vec stationary = Vec::Zero(nb);
  for (int t = 0; t < ref.T(); ++t) stationary[bin_of(ref.states(t, 0), B, nb)] += 1.0;
  stationary /= ref.T();

  SystemSpec start_spec = spec;
  start_spec.burn_in = 0;
  // counts(t, bin) for one starting bin at a time.
  Mat counts(H, nb);
  Vec worst = Vec::Zero(H);
  Stream chains = Stream(seed).fork("chains");
  for (int b = 0; b < nb; ++b) {
    const double centre = -B + (b + 0.5) * (2.0 * B / nb);
    counts.setZero();
    Vec start = Vec::Constant(1, centre);
    for (int c = 0; c < options.n_chains; ++c) {
      Stepper s(start_spec, chains.fork(static_cast<std::uint64_t>(b)).fork(c)(), start);
      for (int t = 0; t < H; ++t) {
        s.step();
        counts(t, bin_of(s.state()[0], B, nb)) += 1.0;
      }
    }
    for (int t = 0; t < H; ++t) {
      const double tv =
          0.5 * (counts.row(t).transpose() / options.n_chains - stationary).cwiseAbs().sum();
      worst[t] = std::max(worst[t], tv);
    }
  }
  for (int t = 0; t < H; ++t)
    if (worst[t] <= 0.25) return t + 1;
  return H + 1;
}

int exact_mixing_time(const Mat& transition, int max_t) {
  const Eigen::Index n = transition.rows();
  if (n == 0 || transition.cols() != n)
    throw std::invalid_argument("exact_mixing_time: transition matrix must be square and nonempty");
  // Stationary law: pi (P - I) = 0 with sum(pi) = 1, solved in the least-squares sense.
  Mat system(n + 1, n);
  system.topRows(n) = (transition - Mat::Identity(n, n)).transpose();
  system.row(n).setOnes();
  Vec rhs = Vec::Zero(n + 1);
  rhs[n] = 1.0;
  const Vec pi = system.colPivHouseholderQr().solve(rhs);
  Mat power = transition;
  for (int t = 1; t <= max_t; ++t) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      worst = std::max(worst, 0.5 * (power.row(i).transpose() - pi).cwiseAbs().sum());
    if (worst <= 0.25) return t;
    power = power * transition;
  }
  return max_t + 1;
}

}  // namespace nplse
