#include "nplse/harness.hpp"

#include "nplse/csv.hpp"
#include "nplse/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace nplse {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t cell_seed(std::uint64_t seed, std::string_view name, int T, int r) {
  Stream s = Stream(seed).fork(name).fork(static_cast<std::uint64_t>(T)).fork(static_cast<std::uint64_t>(r));
  return s();
}

std::uint64_t system_seed(const ExperimentConfig& c, int s) {
  return c.sweep.systems <= 1 ? c.seed : replicate_seed(c.seed, "system", s);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join_path(const ExperimentConfig& c, const std::string& suffix) {
  std::filesystem::create_directories(c.output.dir);
  return (std::filesystem::path(c.output.dir) / (c.output.prefix + "_" + suffix)).string();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  return os;
}

SystemSpec sine_system(double scale, double sigma, bool tabulated = false) {
  SystemConfig c;
  c.truth.type = tabulated ? "sine_tabulated" : "sine";
  c.truth.scale = scale;
  c.noise_sigma = sigma;
  c.state_bound = 1.0;
  return build_system(c, 0);
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "reduced" || name == "full") {
    const bool full = name == "full";
    c.system.kind = "autoregressive";
    c.system.truth.type = "rkhs_random";
    c.system.truth.k = full ? 10000 : 500;
    c.system.truth.rho = 0.9;
    c.system.truth.bandwidth = 1.0;
    c.system.d_x = c.system.d_y = full ? 5 : 3;
    c.system.noise_sigma = 0.1;
    c.system.state_bound = 10.0;
    c.system.burn_in = 1000;
    c.cls.type = "rkhs_ball";
    c.cls.radius.reset();
    c.cls.bandwidth = 1.0;
    c.sweep.T = {50, 100, 200, 350, 500};
    c.sweep.replicates = 1;
    c.sweep.systems = full ? 10 : 5;
    c.sweep.n_fresh = full ? 1000 : 200;
  } else if (name == "lipschitz") {
    c.system.truth.type = "sine";
    c.system.truth.scale = 0.7;
    c.system.noise_sigma = 0.1;
    c.system.state_bound = 1.0;
    c.cls.type = "lipschitz1d";
    c.cls.L = 1.0;
    c.cls.lo = -1.0;
    c.cls.hi = 1.0;
    c.sweep.T = {128, 256, 512, 1024, 2048, 4096, 8192};
    c.sweep.replicates = 20;
    c.sweep.n_fresh = 500;
    c.bounds.L_star = 0.7;
  } else if (name == "glm") {
    c.system.truth.type = "glm_random";
    c.system.truth.link = "tanh";
    c.system.truth.op_norm = 0.8;
    c.system.d_x = c.system.d_y = 3;
    c.system.noise_sigma = 0.1;
    c.system.state_bound = 2.0;
    c.cls.type = "glm";
    c.cls.link = "tanh";
    c.cls.C = 2.0;
    c.sweep.T = {128, 256, 512, 1024, 2048, 4096, 8192};
    c.sweep.replicates = 10;
    c.sweep.n_fresh = 500;
    c.bounds.L_star = 0.8;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected reduced, full, lipschitz or glm)");
  }
  return c;
}

ExperimentConfig effective_config(const RunOptions& o) {
  ExperimentConfig c = o.preset ? preset_config(*o.preset) : ExperimentConfig{};
  if (o.config_path) c = load_config(*o.config_path, c);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.out_dir) c.output.dir = *o.out_dir;
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  return c;
}

std::vector<std::string> provenance_lines(const ExperimentConfig& config, const std::string& subcommand) {
  std::vector<std::string> out{"nplse " + subcommand};
  std::istringstream is(serialize_config(config));
  std::string line;
  // The worker count never changes results, so it stays out of the header
  // and outputs are byte-identical across thread counts.
  while (std::getline(is, line))
    if (!line.empty() && line.rfind("threads:", 0) != 0) out.push_back("config " + line);
  return out;
}

double class_lipschitz(const HypothesisClass& cls) {
  return std::visit(
      [&](const auto& c) -> double {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, Lipschitz1DClass>) {
          return c.L;
        } else if constexpr (std::is_same_v<C, RkhsBallClass>) {
          // |f(x) - f(z)| <= R |K(x,.) - K(z,.)|_H <= R |x - z| / bandwidth
          return c.radius / c.kernel.bandwidth;
        } else if constexpr (std::is_same_v<C, GlmClass>) {
          return c.C;
        } else {
          double L = 0.0;
          for (const auto& f : c.members) {
            const auto l = f.lipschitz();
            if (!l) return kNaN;
            L = std::max(L, *l);
          }
          return L;
        }
      },
      cls.variant);
}

double truth_contraction(const ExperimentConfig& config, const SystemSpec& spec) {
  if (config.bounds.L_star) return *config.bounds.L_star;
  if (const auto l = spec.truth.lipschitz()) return *l;
  return contraction_estimate(spec.truth, spec.state_bound, 10000, Stream(config.seed).fork("contraction")());
}

double theorem_rate(const EntropyModel& entropy, double sigma_w, double T, int d_y, double sigma_T_sq,
                    const BoundConstants& k) {
  if (const auto* np = std::get_if<NonparametricEntropy>(&entropy)) {
    if (np->q < 2.0) return nonparametric_rate(np->p, np->q, sigma_w, T, sigma_T_sq, d_y).value;
    if (np->q > 2.0) return heavy_rate(np->p, np->q, sigma_w, T, d_y, sigma_T_sq, k);
    return kNaN;
  }
  if (const auto* pa = std::get_if<ParametricEntropy>(&entropy))
    return parametric_rate(pa->p, pa->c, sigma_w, T, d_y, sigma_T_sq, k);
  return kNaN;
}

ExperimentReport rate_sweep(const ExperimentConfig& c, const std::string& suite) {
  const int S = std::max(1, c.sweep.systems);
  const int R = std::max(1, c.sweep.replicates);
  const int nT = static_cast<int>(c.sweep.T.size());

  std::vector<SystemSpec> systems(S);
  std::vector<HypothesisClass> classes(S);
  std::vector<double> lstar(S);
  for (int s = 0; s < S; ++s) {
    const std::uint64_t ss = system_seed(c, s);
    systems[s] = build_system(c.system, ss);
    classes[s] = build_class(c.cls, systems[s], ss);
    lstar[s] = truth_contraction(c, systems[s]);
  }

  // Bounds depend on (system, T) only.
  std::vector<double> master(S * nT), rate(S * nT), proxy(S * nT);
  parallel_for(S * nT, c.threads, [&](int i) {
    const int s = i / nT;
    const double T = c.sweep.T[i % nT];
    const SystemSpec& spec = systems[s];
    const double L = class_lipschitz(classes[s]);
    double s2 = kNaN;
    if (lstar[s] < 1.0 && std::isfinite(L)) s2 = sigma_contraction(1, 1, spec.state_bound, L, lstar[s], T).value;
    proxy[i] = s2;
    const EntropyModel entropy = classes[s].entropy();
    if (std::isfinite(s2)) {
      master[i] = balance(entropy, spec.noise_sigma, T, spec.d_y, s2).value;
      rate[i] = theorem_rate(entropy, spec.noise_sigma, T, spec.d_y, s2, c.bounds.constants);
    } else {
      master[i] = rate[i] = kNaN;
    }
  });

  ExperimentReport report;
  report.provenance = provenance_lines(c, suite);
  report.rows.resize(static_cast<std::size_t>(nT) * S * R);
  parallel_for(static_cast<int>(report.rows.size()), c.threads, [&](int i) {
    const int ti = i / (S * R);
    const int s = (i / R) % S;
    const int r = i % R;
    const int T = c.sweep.T[ti];
    const std::uint64_t ss = system_seed(c, s);
    const std::uint64_t train = cell_seed(ss, "train", T, r);
    const Trajectory traj = simulate(systems[s], T, train);
    const FittedModel fitted = fit(classes[s], traj);
    const MeanSe err = counterfactual_error(fitted.f, systems[s], T, c.sweep.n_fresh, cell_seed(ss, "fresh", T, r));
    ExperimentRow& row = report.rows[i];
    row.suite = suite;
    row.T = T;
    row.replicate = s * R + r;
    row.seed = train;
    row.error = err.mean;
    row.se = err.se;
    row.bound_master = master[s * nT + ti];
    row.bound_rate = rate[s * nT + ti];
    row.sigma_T_bound = proxy[s * nT + ti];
    row.sigma_T_emp = kNaN;
    if (c.sweep.sigma_reps > 0) {
      const std::vector<std::pair<Function, Function>> pairs{{fitted.f, systems[s].truth}};
      const double range = 2.0 * std::max(1.0, std::abs(class_lipschitz(classes[s])) * systems[s].state_bound);
      row.sigma_T_emp = estimate_sigma_T(pairs, systems[s], T, c.sweep.sigma_reps, default_lambda_grid(range, T),
                                         cell_seed(ss, "sigma", T, r))
                            .value;
    }
  });

  std::vector<double> Ts, errs;
  for (const auto& row : report.rows) {
    Ts.push_back(row.T);
    errs.push_back(row.error);
  }
  if (nT >= 3) report.fit = fit_rate(Ts, errs);

  bool mono_median = true, mono_mean = true;
  double prev_median = std::numeric_limits<double>::infinity(), prev_mean = prev_median;
  for (int ti = 0; ti < nT; ++ti) {
    std::vector<double> e(errs.begin() + static_cast<std::ptrdiff_t>(ti) * S * R,
                          errs.begin() + static_cast<std::ptrdiff_t>(ti + 1) * S * R);
    const double med = median(e);
    const double mean = mean_se(e).mean;
    report.footer_extra.emplace_back("median_T" + std::to_string(c.sweep.T[ti]), fmt(med));
    report.footer_extra.emplace_back("mean_T" + std::to_string(c.sweep.T[ti]), fmt(mean));
    mono_median = mono_median && med < prev_median;
    mono_mean = mono_mean && mean < prev_mean;
    prev_median = med;
    prev_mean = mean;
  }
  report.footer_extra.emplace_back("monotone_median", mono_median ? "1" : "0");
  report.footer_extra.emplace_back("monotone_mean", mono_mean ? "1" : "0");
  return report;
}

void write_trajectory(std::ostream& os, const Trajectory& traj, const std::vector<std::string>& comments) {
  CsvTable t;
  t.comments = comments;
  t.comments.push_back("trajectory seed=" + std::to_string(traj.seed));
  t.header.push_back("t");
  for (Eigen::Index j = 0; j < traj.states.cols(); ++j) t.header.push_back("x" + std::to_string(j));
  for (Eigen::Index j = 0; j < traj.outputs.cols(); ++j) t.header.push_back("y" + std::to_string(j));
  for (Eigen::Index j = 0; j < traj.noises.cols(); ++j) t.header.push_back("w" + std::to_string(j));
  for (int i = 0; i < traj.T(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (Eigen::Index j = 0; j < traj.states.cols(); ++j) row.push_back(fmt(traj.states(i, j)));
    for (Eigen::Index j = 0; j < traj.outputs.cols(); ++j) row.push_back(fmt(traj.outputs(i, j)));
    for (Eigen::Index j = 0; j < traj.noises.cols(); ++j) row.push_back(fmt(traj.noises(i, j)));
    t.rows.push_back(std::move(row));
  }
  write_csv(os, t);
}

Trajectory read_trajectory(std::istream& is) {
  const CsvTable t = read_csv(is);
  int dx = 0, dy = 0, dw = 0;
  for (const auto& h : t.header) {
    if (h.empty()) continue;
    dx += h[0] == 'x';
    dy += h[0] == 'y';
    dw += h[0] == 'w';
  }
  if (dx == 0 || dy == 0) throw std::runtime_error("trajectory CSV: needs x* and y* columns");
  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  Trajectory traj;
  traj.states.resize(n, dx);
  traj.outputs.resize(n, dy);
  traj.noises = Samples::Zero(n, dy);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < dx; ++j) traj.states(i, j) = t.number(i, "x" + std::to_string(j));
    for (int j = 0; j < dy; ++j) traj.outputs(i, j) = t.number(i, "y" + std::to_string(j));
    for (int j = 0; j < std::min(dw, dy); ++j) traj.noises(i, j) = t.number(i, "w" + std::to_string(j));
  }
  for (const auto& com : t.comments) {
    if (com.rfind("trajectory seed=", 0) == 0) traj.seed = std::stoull(com.substr(16));
  }
  return traj;
}

std::vector<BoundRow> bound_rows(const ExperimentConfig& c) {
  const SystemSpec spec = build_system(c.system, c.seed);
  const HypothesisClass cls = build_class(c.cls, spec, c.seed);
  const EntropyModel entropy = cls.entropy();
  const double L = class_lipschitz(cls);
  const double Ls = truth_contraction(c, spec);
  const double B = spec.state_bound;
  std::vector<BoundRow> rows;

  auto value_row = [&](const std::string& name, double T, double s2, double value) {
    BoundRow r;
    r.name = name;
    r.inputs.sigma_w = spec.noise_sigma;
    r.inputs.T = T;
    r.inputs.d_y = spec.d_y;
    r.inputs.entropy = entropy;
    r.inputs.sigma_T_sq = s2;
    r.terms.total = value;
    rows.push_back(r);
  };

  int t_mix = 0;
  if (spec.d_x == 1) t_mix = mixing_time_estimate(spec, MixingOptions{}, Stream(c.seed).fork("mixing")());

  for (int Ti : c.sweep.T) {
    const double T = Ti;
    double s2 = kNaN;
    if (Ls < 1.0 && std::isfinite(L)) {
      s2 = sigma_contraction(1, 1, B, L, Ls, T).value;
      value_row("sigma_contraction", T, s2, s2);
      value_row("sigma_eiss", T, s2, sigma_eiss(L, B, 1.0, Ls, T).value);
    }
    if (t_mix > 0) value_row("sigma_mixing", T, kNaN, sigma_mixing(B, t_mix, T, c.bounds.constants.c_mix).value);
    if (!std::isfinite(s2)) continue;

    const Balanced bal = balance(entropy, spec.noise_sigma, T, spec.d_y, s2);
    BoundRow m;
    m.name = "master_balanced";
    m.inputs = BoundInputs{spec.noise_sigma, T, spec.d_y, entropy, s2, bal.gamma, bal.delta, bal.alpha};
    m.terms = master_terms(m.inputs);
    rows.push_back(m);

    if (c.bounds.gamma || c.bounds.delta || c.bounds.alpha) {
      BoundRow o = m;
      o.name = "master_config";
      o.inputs.gamma = c.bounds.gamma.value_or(bal.gamma);
      o.inputs.delta = c.bounds.delta.value_or(bal.delta);
      o.inputs.alpha_trunc = c.bounds.alpha.value_or(0.0);
      o.terms = master_terms(o.inputs);
      rows.push_back(o);
    }

    if (const auto* np = std::get_if<NonparametricEntropy>(&entropy)) {
      if (np->q < 2.0) {
        const RateResult rr = nonparametric_rate(np->p, np->q, spec.noise_sigma, T, s2, spec.d_y);
        BoundRow n;
        n.name = "nonparametric_rate";
        n.inputs = BoundInputs{spec.noise_sigma, T, spec.d_y, entropy, s2, rr.gamma, rr.delta, 0.0};
        n.terms = master_terms(n.inputs);
        rows.push_back(n);
        value_row("nonparametric_asymptotic", T, s2, rr.asymptotic);
      } else if (np->q > 2.0) {
        value_row("heavy_rate", T, s2,
                  heavy_rate(np->p, np->q, spec.noise_sigma, T, spec.d_y, s2, c.bounds.constants));
      }
    } else if (const auto* pa = std::get_if<ParametricEntropy>(&entropy)) {
      value_row("parametric_rate", T, s2,
                parametric_rate(pa->p, pa->c, spec.noise_sigma, T, spec.d_y, s2, c.bounds.constants));
    } else if (const auto* fi = std::get_if<FiniteEntropy>(&entropy)) {
      value_row("finite_class_bound", T, s2,
                finite_class_bound(fi->log_cardinality, spec.noise_sigma, T, ContractionProvenance{1, 1, B, L, Ls},
                                   c.bounds.constants));
    }
    if (bal.delta > 0.0 || std::holds_alternative<FiniteEntropy>(entropy)) {
      const double info = log_covering_bound(entropy, std::max(bal.delta, 1e-300));
      value_row("gen_bound_lipschitz_loss", T, s2, gen_bound_lipschitz_loss(L, B, 1.0, Ls, T, info));
    }
  }
  return rows;
}

// ---- verification suites ---------------------------------------------------

std::vector<VerifyRow> verify_basic_inequality(const VerifySizes& z, std::uint64_t seed, int threads) {
  const double sigmas[] = {0.05, 0.1, 0.3};
  const int n = z.basic_instances;
  std::vector<char> ok(n);
  std::vector<double> gap(n);
  parallel_for(n, threads, [&](int i) {
    const std::uint64_t s = replicate_seed(seed, "basic", i);
    const SystemSpec spec = sine_system(0.7, sigmas[i % 3], true);
    const FiniteClass cls = make_finite_class(spec.truth, spec.state_bound, 16, 0.3, s);
    const BasicInequality b = basic_inequality_check(cls, spec.truth, simulate(spec, z.basic_T, s));
    ok[i] = b.holds;
    gap[i] = b.lhs - b.rhs;
  });
  VerifyRow r;
  r.suite = "basic_inequality";
  r.config = "instances=" + std::to_string(n) + " size=16 T=" + std::to_string(z.basic_T) +
             " max_gap=" + fmt(*std::max_element(gap.begin(), gap.end()));
  r.statistic = static_cast<double>(std::count(ok.begin(), ok.end(), 0));
  r.bound = 0.0;
  r.pass = r.statistic == 0.0;
  return {r};
}

std::vector<VerifyRow> verify_mgf(const VerifySizes& z, std::uint64_t seed, int threads) {
  const double sigma = 0.2;
  const double fractions[] = {0.1, 0.25, 0.5, 0.75, 1.0};
  const SystemSpec spec = sine_system(0.7, sigma);
  const int n_fn = std::max(1, z.mgf_configs / 5);
  std::vector<Function> hs;
  std::vector<double> amps;
  for (int i = 0; i < n_fn; ++i) {
    Stream rng = Stream(seed).fork("mgf-function").fork(static_cast<std::uint64_t>(i));
    const double amp = 0.05 * (i + 1);
    const Function bump = random_lipschitz_function(rng, 1.0, spec.state_bound, -1.0, 1.0);
    const Vec grid = Vec::LinSpaced(65, -spec.state_bound, spec.state_bound);
    Vec v(65);
    for (int k = 0; k < 65; ++k) v[k] = amp * bump(grid[k]);
    hs.push_back(piecewise_linear(grid, v));
    amps.push_back(amp);
  }
  std::vector<VerifyRow> rows;
  auto add = [&](int i, double lambda, const std::string& label, bool informational) {
    const MeanSe m = mgf_check(hs[i], spec, z.mgf_T, lambda, z.mgf_reps,
                               replicate_seed(seed, "mgf", static_cast<int>(rows.size())), threads);
    VerifyRow r;
    r.suite = informational ? "mgf_corrected" : "mgf";
    r.config = "amp=" + fmt(amps[i]) + " lambda=" + label + " sigma_w=" + fmt(sigma) + " T=" +
               std::to_string(z.mgf_T);
    r.statistic = m.mean;
    r.bound = 1.0;
    r.se = m.se;
    r.pass = m.mean <= 1.0 + 3.0 * m.se;
    r.informational = informational;
    rows.push_back(r);
  };
  const double lmax = 1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < n_fn; ++i)
    for (double f : fractions) add(i, f * lmax, fmt(f) + "/(2sigma^2)", false);
  // Sub-Gaussian step of the tower argument needs lambda <= 1/(8 sigma^2).
  for (int i = 0; i < n_fn; ++i) add(i, lmax / 4.0, "1/(8sigma^2)", true);
  return rows;
}

std::vector<VerifyRow> verify_offset_supremum(const VerifySizes& z, std::uint64_t seed, int threads) {
  const double sigma = 0.5;
  const SystemSpec spec = sine_system(0.7, sigma, true);
  std::vector<VerifyRow> rows;
  for (int size : {2, 8, 64}) {
    const FiniteClass cls = make_finite_class(spec.truth, spec.state_bound, size, 0.3,
                                              replicate_seed(seed, "offset-class", size));
    const OffsetSupremum o =
        offset_supremum(cls, spec, z.offset_T, z.offset_reps, replicate_seed(seed, "offset", size), threads);
    const std::string cfg = "size=" + std::to_string(size) + " sigma_w=" + fmt(sigma) + " T=" +
                            std::to_string(z.offset_T) + " r=" + fmt(o.r);
    const double log_s = std::log(static_cast<double>(size));
    auto row = [&](const std::string& suite, double bound, bool informational) {
      VerifyRow r;
      r.suite = suite;
      r.config = cfg;
      r.statistic = o.estimate.mean;
      r.bound = bound;
      r.se = o.estimate.se;
      r.pass = o.estimate.mean <= bound + 3.0 * o.estimate.se;
      r.informational = informational;
      rows.push_back(r);
    };
    row("offset_maximal", o.maximal_bound, false);
    row("offset_chaining", o.chaining_bound, false);
    row("offset_maximal_corrected", 8.0 * sigma * sigma * log_s, true);
    row("offset_chaining_corrected", std::sqrt(32.0 * z.offset_T * sigma * sigma * o.r * o.r * log_s), true);

    // Members large enough that sum_t |h|^2 is of order 8 sigma^2 log |S|.
    const FiniteClass big = make_finite_class(spec.truth, spec.state_bound, size, 1.0,
                                              replicate_seed(seed, "offset-stress-class", size));
    const OffsetSupremum os =
        offset_supremum(big, spec, z.offset_T, z.offset_reps, replicate_seed(seed, "offset-stress", size), threads);
    VerifyRow r;
    r.suite = "offset_maximal_stress";
    r.config = "size=" + std::to_string(size) + " sigma_w=" + fmt(sigma) + " T=" + std::to_string(z.offset_T) +
               " perturbation=1 r=" + fmt(os.r);
    r.statistic = os.estimate.mean;
    r.bound = os.maximal_bound;
    r.se = os.estimate.se;
    r.pass = os.estimate.mean <= r.bound + 3.0 * r.se;
    r.informational = true;
    rows.push_back(r);
  }
  return rows;
}

std::vector<VerifyRow> verify_decoupling(const VerifySizes& z, std::uint64_t seed, int threads) {
  struct Cfg {
    double scale, sigma;
    int size;
    double perturbation;
  };
  const Cfg cfgs[] = {{0.7, 0.1, 16, 0.3}, {0.5, 0.1, 16, 0.3}, {0.7, 0.3, 16, 0.3},
                      {0.7, 0.1, 8, 0.1},  {0.3, 0.2, 32, 0.2}, {0.9, 0.1, 16, 0.3}};
  std::vector<VerifyRow> dec, dom;
  int idx = 0;
  for (const Cfg& g : cfgs) {
    const SystemSpec spec = sine_system(g.scale, g.sigma, true);
    const FiniteClass cls =
        make_finite_class(spec.truth, spec.state_bound, g.size, g.perturbation, replicate_seed(seed, "dec-class", idx));
    HypothesisClass h;
    h.variant = cls;
    h.domain_bound = spec.state_bound;
    const double L = class_lipschitz(h);
    for (int T : {64, 256}) {
      const double s2 = sigma_contraction(1, 1, spec.state_bound, L, g.scale, T).value;
      const DecouplingResult d = decoupling_check(cls, spec, T, z.decoupling_reps, z.decoupling_fresh, s2,
                                                  replicate_seed(seed, "decoupling", idx * 2 + (T == 256)), threads);
      const std::string cfg = "scale=" + fmt(g.scale) + " sigma_w=" + fmt(g.sigma) + " size=" +
                              std::to_string(g.size) + " perturbation=" + fmt(g.perturbation) +
                              " T=" + std::to_string(T);
      VerifyRow r;
      r.suite = "decoupling";
      r.config = cfg + " entropy=" + fmt(d.entropy);
      r.statistic = d.lhs;
      r.bound = d.rhs;
      r.se = std::sqrt(d.lhs_se * d.lhs_se + d.rhs_se * d.rhs_se);
      r.pass = d.pass;
      dec.push_back(r);

      BoundInputs in;
      in.sigma_w = g.sigma;
      in.T = T;
      in.entropy = FiniteEntropy{std::log(static_cast<double>(g.size))};
      in.sigma_T_sq = s2;
      VerifyRow m;
      m.suite = "master_dominance";
      m.config = cfg;
      m.statistic = d.lhs;
      m.bound = master_bound(in);
      m.se = d.lhs_se;
      m.pass = d.lhs <= m.bound + 3.0 * d.lhs_se;
      dom.push_back(m);
    }
    ++idx;
  }
  dec.insert(dec.end(), dom.begin(), dom.end());
  return dec;
}

std::vector<VerifyRow> verify_contraction_proxy(const VerifySizes& z, std::uint64_t seed, int threads) {
  const std::pair<double, double> cfgs[] = {{0.2, 0.1}, {0.5, 0.1}, {0.7, 0.1}, {0.9, 0.1}, {0.5, 0.3},
                                            {0.7, 0.3}, {0.9, 0.3}, {0.7, 0.05}, {0.3, 0.2}, {0.8, 0.2}};
  std::vector<VerifyRow> rows;
  const int n = std::min<int>(z.sigma_configs, 10);
  for (int i = 0; i < n; ++i) {
    const auto [scale, sigma] = cfgs[i];
    const SystemSpec spec = sine_system(scale, sigma);
    std::vector<std::pair<Function, Function>> pairs;
    Stream rng = Stream(seed).fork("proxy-pairs").fork(static_cast<std::uint64_t>(i));
    for (int p = 0; p < 4; ++p) {
      Function f = random_lipschitz_function(rng, 1.0, spec.state_bound, -1.0, 1.0);
      Function g = random_lipschitz_function(rng, 1.0, spec.state_bound, -1.0, 1.0);
      pairs.emplace_back(f, g);
    }
    for (int T : {64, 256, 1024}) {
      const SigmaEstimate e = estimate_sigma_T(pairs, spec, T, z.sigma_reps, default_lambda_grid(2.0, T),
                                               cell_seed(seed, "proxy", T, i), threads);
      VerifyRow r;
      r.suite = "contraction_proxy";
      r.config = "scale=" + fmt(scale) + " sigma_w=" + fmt(sigma) + " T=" + std::to_string(T) +
                 " ci_hi=" + fmt(e.ci_hi) + " dropped=" + std::to_string(e.dropped_lambdas);
      r.statistic = e.value;
      r.bound = sigma_contraction(1, 1, spec.state_bound, 1.0, scale, T).value;
      r.se = (e.ci_hi - e.ci_lo) / 3.92;
      r.pass = e.value <= r.bound;
      rows.push_back(r);
    }
  }
  return rows;
}

std::vector<VerifyRow> verify_all(const VerifySizes& z, std::uint64_t seed, int threads) {
  std::vector<VerifyRow> rows;
  for (auto&& part : {verify_basic_inequality(z, seed, threads), verify_mgf(z, seed, threads),
                      verify_offset_supremum(z, seed, threads), verify_decoupling(z, seed, threads),
                      verify_contraction_proxy(z, seed, threads)})
    rows.insert(rows.end(), part.begin(), part.end());
  return rows;
}

void write_verify_table(std::ostream& os, const std::vector<VerifyRow>& rows,
                        const std::vector<std::string>& comments) {
  CsvTable t;
  t.comments = comments;
  t.header = {"suite", "config", "statistic", "bound", "se", "result", "informational"};
  for (const auto& r : rows)
    t.rows.push_back({r.suite, r.config, fmt(r.statistic), fmt(r.bound), fmt(r.se), r.pass ? "pass" : "fail",
                      r.informational ? "1" : "0"});
  write_csv(os, t);
}

// ---- subcommands -----------------------------------------------------------

namespace {

int cmd_simulate(const ExperimentConfig& c, const RunOptions& o, std::ostream& out) {
  const SystemSpec spec = build_system(c.system, c.seed);
  const int T = o.T.value_or(c.sweep.T.front());
  const Trajectory traj = simulate(spec, T, c.seed);
  const std::string path = join_path(c, "trajectory.csv");
  std::ofstream os = open_output(path);
  write_trajectory(os, traj, provenance_lines(c, "simulate"));
  out << path << "\n";
  return 0;
}

int cmd_fit(const ExperimentConfig& c, const RunOptions& o, std::ostream& out) {
  const SystemSpec spec = build_system(c.system, c.seed);
  Trajectory traj;
  if (o.input) {
    std::ifstream in(*o.input);
    if (!in) throw std::runtime_error(*o.input + ": trajectory file not found");
    traj = read_trajectory(in);
  } else {
    traj = simulate(spec, o.T.value_or(c.sweep.T.front()), c.seed);
  }
  const HypothesisClass cls = build_class(c.cls, spec, c.seed);
  const FittedModel m = fit(cls, traj);
  const std::string path = join_path(c, "model.csv");
  std::ofstream os = open_output(path);
  for (const auto& line : provenance_lines(c, "fit")) os << "# " << line << "\n";
  os << "# training_error=" << fmt(training_error(m.f, traj)) << "\n";
  write_model(os, m);
  out << path << "\n" << "training_error=" << fmt(training_error(m.f, traj)) << "\n";
  return 0;
}

int cmd_eval(const ExperimentConfig& c, const RunOptions& o, std::ostream& out) {
  if (!o.input) throw std::runtime_error("eval: --input MODEL is required");
  std::ifstream in(*o.input);
  if (!in) throw std::runtime_error(*o.input + ": model artifact not found");
  const FittedModel m = read_model(in);
  const SystemSpec spec = build_system(c.system, c.seed);
  const int T = o.T.value_or(c.sweep.T.front());
  const MeanSe e = counterfactual_error(m.f, spec, T, c.sweep.n_fresh, Stream(c.seed).fork("eval")());
  CsvTable t;
  t.comments = provenance_lines(c, "eval");
  t.comments.push_back("model " + *o.input);
  t.header = {"T", "n_fresh", "error", "se"};
  t.rows.push_back({std::to_string(T), std::to_string(c.sweep.n_fresh), fmt(e.mean), fmt(e.se)});
  const std::string path = join_path(c, "eval.csv");
  std::ofstream os = open_output(path);
  write_csv(os, t);
  out << path << "\n" << "error=" << fmt(e.mean) << " se=" << fmt(e.se) << "\n";
  return 0;
}

int cmd_bounds(const ExperimentConfig& c, std::ostream& out) {
  const std::string path = join_path(c, "bounds.csv");
  const auto rows = bound_rows(c);
  std::ofstream os = open_output(path);
  write_bound_report(os, rows, provenance_lines(c, "bounds"));
  out << path << "\n";
  return 0;
}

int cmd_sweep(const ExperimentConfig& c, const std::string& sub, const std::string& file, std::ostream& out) {
  const ExperimentReport r = rate_sweep(c, sub);
  const std::string path = join_path(c, file);
  std::ofstream os = open_output(path);
  write_experiment_report(os, r);
  out << path << "\n" << "slope=" << fmt(r.fit.slope) << " ci=[" << fmt(r.fit.ci_lo) << "," << fmt(r.fit.ci_hi)
      << "]\n";
  return 0;
}

int cmd_verify(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  const auto rows = verify_all(VerifySizes{}, c.seed, c.threads);
  const std::string path = join_path(c, "verify.csv");
  std::ofstream os = open_output(path);
  write_verify_table(os, rows, provenance_lines(c, "verify"));
  out << path << "\n";
  int failed = 0;
  std::string first;
  for (const auto& r : rows) {
    if (r.pass || r.informational) continue;
    if (!failed) first = r.suite + " (" + r.config + ")";
    ++failed;
  }
  if (failed) {
    err << "verify: " << failed << " row(s) failed, first: " << first << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int run(const std::string& sub, const RunOptions& o, std::ostream& out, std::ostream& err) {
  try {
    RunOptions opts = o;
    if (sub == "reproduce-d2" && !opts.preset && !opts.config_path) opts.preset = "full";
    const ExperimentConfig c = effective_config(opts);
    if (sub == "simulate") return cmd_simulate(c, opts, out);
    if (sub == "fit") return cmd_fit(c, opts, out);
    if (sub == "eval") return cmd_eval(c, opts, out);
    if (sub == "bounds") return cmd_bounds(c, out);
    if (sub == "rate-sweep") return cmd_sweep(c, sub, "rate_sweep.csv", out);
    if (sub == "verify") return cmd_verify(c, out, err);
    if (sub == "reproduce-d2") {
      if (c.cls.type != "rkhs_ball") throw ConfigError("reproduce-d2: class.type must be rkhs_ball");
      return cmd_sweep(c, sub, "d2.csv", out);
    }
    err << "unknown subcommand '" << sub << "'\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << sub << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nplse
