#include "nplse/empirics.hpp"

#include "nplse/csv.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace nplse {

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  if (n <= 0) return;
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int k = 0; k < threads; ++k) {
    pool.emplace_back([&]() {
      for (int i = next++; i < n && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t replicate_seed(std::uint64_t seed, std::string_view stream, int r) {
  Stream s = Stream(seed).fork(stream).fork(static_cast<std::uint64_t>(r));
  return s();
}

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  out.n = static_cast<int>(xs.size());
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (out.n - 1)) / std::sqrt(static_cast<double>(out.n));
  }
  return out;
}

MeanSe counterfactual_error(const Function& fitted, const SystemSpec& spec, int T, int n_fresh,
                            std::uint64_t seed) {
  if (n_fresh < 2) throw std::invalid_argument("counterfactual_error: n_fresh must be >= 2");
  const Samples xi = sample_counterfactual_states(spec, T, n_fresh, seed);
  std::vector<double> errs(n_fresh);
  Vec a(fitted.output_dim()), b(spec.d_y);
  for (int i = 0; i < n_fresh; ++i) {
    fitted.evaluate(xi.row(i).transpose(), a);
    spec.truth.evaluate(xi.row(i).transpose(), b);
    errs[i] = (a - b).norm();
  }
  return mean_se(errs);
}

std::vector<double> default_lambda_grid(double range, int T, int n) {
  if (!(range > 0.0)) throw std::invalid_argument("default_lambda_grid: range must be > 0");
  if (n < 2) throw std::invalid_argument("default_lambda_grid: need at least two points");
  const double lmax = 6.0 * std::sqrt(static_cast<double>(T)) / range;
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = -lmax + 2.0 * lmax * i / (n - 1);
  return grid;
}

namespace {

// max over nonzero lambda of 2 log(mean exp(lambda (F - mean F))) / lambda^2
double log_mgf_proxy(const std::vector<double>& F, const std::vector<int>& idx, const std::vector<double>& grid,
                     int* dropped) {
  const double n = static_cast<double>(idx.size());
  double mean = 0.0;
  for (int i : idx) mean += F[i];
  mean /= n;
  double best = 0.0;
  for (double lam : grid) {
    if (lam == 0.0) continue;
    double top = -std::numeric_limits<double>::infinity();
    for (int i : idx) top = std::max(top, lam * (F[i] - mean));
    double acc = 0.0;
    for (int i : idx) acc += std::exp(lam * (F[i] - mean) - top);
    const double log_mgf = top + std::log(acc / n);
    if (!std::isfinite(log_mgf)) {
      if (dropped) ++*dropped;
      continue;
    }
    best = std::max(best, 2.0 * log_mgf / (lam * lam));
  }
  return best;
}

}  // namespace

SigmaEstimate estimate_sigma_T(const std::vector<std::pair<Function, Function>>& pairs, const SystemSpec& spec,
                               int T, int n_rep, const std::vector<double>& lambda_grid, std::uint64_t seed,
                               int threads) {
  if (n_rep < 100) throw std::invalid_argument("estimate_sigma_T: n_rep must be >= 100");
  if (lambda_grid.empty()) throw std::invalid_argument("estimate_sigma_T: empty lambda grid");
  const std::size_t P = pairs.size();
  // F[p][r]
  std::vector<std::vector<double>> F(P, std::vector<double>(n_rep));
  parallel_for(n_rep, threads, [&](int r) {
    const Trajectory traj = simulate(spec, T, replicate_seed(seed, "sigma", r));
    for (std::size_t p = 0; p < P; ++p) {
      double s = 0.0;
      for (int t = 0; t < T; ++t) {
        const Vec x = traj.states.row(t).transpose();
        s += (pairs[p].first(x) - pairs[p].second(x)).norm();
      }
      F[p][r] = s / T;
    }
  });

  SigmaEstimate out;
  std::vector<int> all(n_rep);
  for (int r = 0; r < n_rep; ++r) all[r] = r;
  for (std::size_t p = 0; p < P; ++p)
    out.value = std::max(out.value, log_mgf_proxy(F[p], all, lambda_grid, &out.dropped_lambdas));

  const int n_boot = 200;
  std::vector<double> boot(n_boot);
  Stream rng = Stream(seed).fork("bootstrap");
  std::vector<int> idx(n_rep);
  for (int b = 0; b < n_boot; ++b) {
    for (int r = 0; r < n_rep; ++r) idx[r] = static_cast<int>(rng.below(n_rep));
    double v = 0.0;
    for (std::size_t p = 0; p < P; ++p) v = std::max(v, log_mgf_proxy(F[p], idx, lambda_grid, nullptr));
    boot[b] = v;
  }
  std::sort(boot.begin(), boot.end());
  out.ci_lo = boot[static_cast<int>(0.025 * (n_boot - 1))];
  out.ci_hi = boot[static_cast<int>(std::ceil(0.975 * (n_boot - 1)))];
  return out;
}

double offset_process(const Function& h, const Trajectory& traj) {
  Vec v(h.output_dim());
  double m = 0.0;
  for (int t = 0; t < traj.T(); ++t) {
    h.evaluate(traj.states.row(t).transpose(), v);
    m += 4.0 * traj.noises.row(t).dot(v.transpose()) - v.squaredNorm();
  }
  return m;
}

OffsetProcessSample offset_process_sample(const std::vector<Function>& members, const Function& truth,
                                          const Trajectory& traj) {
  OffsetProcessSample s;
  s.sup = -std::numeric_limits<double>::infinity();
  const int T = traj.T();
  const int d = truth.output_dim();
  Samples fstar(T, d);
  Vec v(d);
  for (int t = 0; t < T; ++t) {
    truth.evaluate(traj.states.row(t).transpose(), v);
    fstar.row(t) = v.transpose();
  }
  for (const auto& f : members) {
    double m = 0.0;
    for (int t = 0; t < T; ++t) {
      f.evaluate(traj.states.row(t).transpose(), v);
      v -= fstar.row(t).transpose();
      m += 4.0 * traj.noises.row(t).dot(v.transpose()) - v.squaredNorm();
    }
    s.values.push_back(m);
    s.sup = std::max(s.sup, m);
  }
  return s;
}

MeanSe mgf_check(const Function& h, const SystemSpec& spec, int T, double lambda, int n_rep, std::uint64_t seed,
                 int threads) {
  const double s2 = spec.noise_sigma * spec.noise_sigma;
  if (!(lambda >= 0.0) || (s2 > 0.0 && lambda > 1.0 / (2.0 * s2) * (1.0 + 1e-12)))
    throw std::invalid_argument("mgf_check: lambda must lie in [0, 1/(2 sigma_w^2)]");
  std::vector<double> vals(n_rep);
  parallel_for(n_rep, threads, [&](int r) {
    const Trajectory traj = simulate(spec, T, replicate_seed(seed, "mgf", r));
    vals[r] = std::exp(lambda * offset_process(h, traj));
  });
  return mean_se(vals);
}

OffsetSupremum offset_supremum(const FiniteClass& cls, const SystemSpec& spec, int T, int n_rep, std::uint64_t seed,
                               int threads, const Samples* grid) {
  if (cls.members.empty()) throw std::invalid_argument("offset_supremum: empty class");
  std::vector<double> sups(n_rep);
  parallel_for(n_rep, threads, [&](int r) {
    const Trajectory traj = simulate(spec, T, replicate_seed(seed, "offset", r));
    sups[r] = offset_process_sample(cls.members, spec.truth, traj).sup;
  });
  OffsetSupremum out;
  out.estimate = mean_se(sups);
  const double s2 = spec.noise_sigma * spec.noise_sigma;
  const double log_s = std::log(static_cast<double>(cls.members.size()));
  out.maximal_bound = 2.0 * s2 * log_s;
  const Samples default_grid = uniform_grid(spec.state_bound, 512);
  const Samples& g = grid ? *grid : default_grid;
  if (g.cols() == spec.d_x) {
    for (const auto& f : cls.members) out.r = std::max(out.r, sup_distance(f, spec.truth, g));
  }
  out.chaining_bound = std::sqrt(2.0 * T * s2 * out.r * out.r * log_s);
  return out;
}

BasicInequality basic_inequality_check(const FiniteClass& cls, const Function& truth, const Trajectory& traj) {
  const FittedModel fitted = lse_finite(cls, traj);
  BasicInequality out;
  const int T = traj.T();
  Vec a(truth.output_dim()), b(truth.output_dim());
  double s = 0.0;
  for (int t = 0; t < T; ++t) {
    fitted.f.evaluate(traj.states.row(t).transpose(), a);
    truth.evaluate(traj.states.row(t).transpose(), b);
    s += (a - b).squaredNorm();
  }
  out.lhs = s / T;
  out.rhs = offset_process_sample(cls.members, truth, traj).sup / T;
  // Only floating-point rounding separates the two sides when they are equal.
  const double tol = 1e-12 * std::max(1.0, std::abs(out.lhs) + std::abs(out.rhs));
  out.holds = out.lhs <= out.rhs + tol;
  return out;
}

double miller_madow_entropy(const std::vector<int>& counts, int support_size) {
  double n = 0.0;
  int occupied = 0;
  for (int c : counts) {
    n += c;
    if (c > 0) ++occupied;
  }
  if (n == 0.0) return 0.0;
  double h = 0.0;
  for (int c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  h += (occupied - 1) / (2.0 * n);
  return std::min(h, std::log(static_cast<double>(std::max(support_size, 1))));
}

DecouplingResult decoupling_check(const FiniteClass& cls, const SystemSpec& spec, int T, int n_rep, int n_fresh,
                                  double sigma_T_sq, std::uint64_t seed, int threads) {
  if (n_rep < 200) throw std::invalid_argument("decoupling_check: n_rep must be >= 200");
  std::vector<double> lhs(n_rep), train(n_rep);
  std::vector<int> chosen(n_rep);
  parallel_for(n_rep, threads, [&](int r) {
    const Trajectory traj = simulate(spec, T, replicate_seed(seed, "train", r));
    const FittedModel fitted = lse_finite(cls, traj);
    chosen[r] = fitted.member_index;
    lhs[r] = counterfactual_error(fitted.f, spec, T, n_fresh, replicate_seed(seed, "fresh", r)).mean;
    Vec a(spec.d_y), b(spec.d_y);
    double s = 0.0;
    for (int t = 0; t < T; ++t) {
      fitted.f.evaluate(traj.states.row(t).transpose(), a);
      spec.truth.evaluate(traj.states.row(t).transpose(), b);
      s += (a - b).squaredNorm();
    }
    train[r] = s / T;
  });
  std::vector<int> counts(cls.members.size(), 0);
  for (int c : chosen) ++counts[c];

  DecouplingResult out;
  const MeanSe l = mean_se(lhs);
  const MeanSe tr = mean_se(train);
  out.lhs = l.mean;
  out.lhs_se = l.se;
  out.entropy = miller_madow_entropy(counts, static_cast<int>(cls.members.size()));
  out.sigma_T_sq = sigma_T_sq;
  out.training_term = std::sqrt(tr.mean);
  out.rhs = out.training_term + std::sqrt(2.0 * sigma_T_sq * out.entropy);
  out.rhs_se = tr.mean > 0.0 ? tr.se / (2.0 * std::sqrt(tr.mean)) : 0.0;
  const double combined = std::sqrt(out.lhs_se * out.lhs_se + out.rhs_se * out.rhs_se);
  out.pass = out.lhs <= out.rhs + 3.0 * combined;
  return out;
}

RateFit fit_rate(const std::vector<double>& Ts, const std::vector<double>& errors) {
  if (Ts.size() != errors.size()) throw std::invalid_argument("fit_rate: size mismatch");
  std::string bad;
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!(errors[i] > 0.0) || !(Ts[i] > 0.0)) bad += (bad.empty() ? "" : ",") + std::to_string(i);
  if (!bad.empty()) throw std::invalid_argument("fit_rate: nonpositive rows at indices " + bad);
  std::vector<double> distinct = Ts;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw std::invalid_argument("fit_rate: need at least 3 distinct T values");

  const double n = static_cast<double>(Ts.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    mx += std::log(Ts[i]);
    my += std::log(errors[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    const double dx = std::log(Ts[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(errors[i]) - my);
  }
  RateFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    const double res = std::log(errors[i]) - out.intercept - out.slope * std::log(Ts[i]);
    rss += res * res;
  }
  if (n > 2) {
    out.slope_se = std::sqrt(rss / (n - 2) / sxx);
    boost::math::students_t dist(n - 2);
    const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
    out.ci_lo = out.slope - tq * out.slope_se;
    out.ci_hi = out.slope + tq * out.slope_se;
  } else {
    out.ci_lo = out.ci_hi = out.slope;
  }
  return out;
}

void write_experiment_report(std::ostream& os, const ExperimentReport& report) {
  CsvTable t;
  t.comments = report.provenance;
  t.header = {"suite", "T", "replicate", "seed", "error", "se", "bound_master", "bound_rate", "sigma_T_emp",
              "sigma_T_bound"};
  for (const auto& r : report.rows)
    t.rows.push_back({r.suite, std::to_string(r.T), std::to_string(r.replicate), std::to_string(r.seed),
                      format_double(r.error), format_double(r.se), format_double(r.bound_master),
                      format_double(r.bound_rate), format_double(r.sigma_T_emp), format_double(r.sigma_T_bound)});
  write_csv(os, t);
  const RateFit& f = report.fit;
  os << "#footer slope=" << format_double(f.slope) << " intercept=" << format_double(f.intercept)
     << " slope_se=" << format_double(f.slope_se) << " ci_lo=" << format_double(f.ci_lo)
     << " ci_hi=" << format_double(f.ci_hi) << "\n";
  for (const auto& [k, v] : report.footer_extra) os << "#footer " << k << "=" << v << "\n";
}

ExperimentReport read_experiment_report(std::istream& is) {
  const CsvTable t = read_csv(is);
  ExperimentReport rep;
  for (const auto& c : t.comments) {
    if (c.rfind("footer ", 0) != 0) {
      rep.provenance.push_back(c);
      continue;
    }
    std::istringstream ss(c.substr(7));
    std::string tok;
    while (ss >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
      if (k == "slope") rep.fit.slope = std::stod(v);
      else if (k == "intercept") rep.fit.intercept = std::stod(v);
      else if (k == "slope_se") rep.fit.slope_se = std::stod(v);
      else if (k == "ci_lo") rep.fit.ci_lo = std::stod(v);
      else if (k == "ci_hi") rep.fit.ci_hi = std::stod(v);
      else rep.footer_extra.emplace_back(k, v);
    }
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    ExperimentRow r;
    r.suite = t.rows[i][t.column("suite")];
    r.T = static_cast<int>(t.number(i, "T"));
    r.replicate = static_cast<int>(t.number(i, "replicate"));
    r.seed = std::stoull(t.rows[i][t.column("seed")]);
    r.error = t.number(i, "error");
    r.se = t.number(i, "se");
    r.bound_master = t.number(i, "bound_master");
    r.bound_rate = t.number(i, "bound_rate");
    r.sigma_T_emp = t.number(i, "sigma_T_emp");
    r.sigma_T_bound = t.number(i, "sigma_T_bound");
    rep.rows.push_back(r);
  }
  return rep;
}

}  // namespace nplse
