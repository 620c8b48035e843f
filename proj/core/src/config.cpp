#include "nplse/config.hpp"

#include "nplse/csv.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace nplse {
namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Mark& mark, const std::string& what) const {
    std::ostringstream os;
    os << source_;
    if (!mark.is_null()) os << ":" << mark.line + 1;
    os << ": " << what;
    throw ConfigError(os.str());
  }

  void expect_map(const YAML::Node& node, const std::string& where) const {
    if (!node.IsMap()) fail(node.Mark(), "section '" + where + "' must be a mapping");
  }

  void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) const {
    expect_map(node, where);
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first.Mark(), "unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }

  template <class T>
  void get(const YAML::Node& node, const char* key, T& out, const std::string& where) const {
    const YAML::Node v = node[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v.Mark(), "bad value for key '" + (where.empty() ? std::string(key) : where + "." + key) + "'");
    }
  }

  template <class T>
  void get_optional(const YAML::Node& node, const char* key, std::optional<T>& out, const std::string& where) const {
    const YAML::Node v = node[key];
    if (!v) return;
    T tmp{};
    get(node, key, tmp, where);
    out = tmp;
  }

 private:
  std::string source_;
};

void parse_truth(const Reader& r, const YAML::Node& n, TruthConfig& t) {
  r.check_keys(n, {"type", "scale", "link", "matrix", "op_norm", "k", "rho", "bandwidth", "knots", "values"},
               "system.truth");
  r.get(n, "type", t.type, "system.truth");
  r.get(n, "scale", t.scale, "system.truth");
  r.get(n, "link", t.link, "system.truth");
  r.get(n, "matrix", t.matrix, "system.truth");
  r.get(n, "op_norm", t.op_norm, "system.truth");
  r.get(n, "k", t.k, "system.truth");
  r.get(n, "rho", t.rho, "system.truth");
  r.get(n, "bandwidth", t.bandwidth, "system.truth");
  r.get(n, "knots", t.knots, "system.truth");
  r.get(n, "values", t.values, "system.truth");
  static const std::set<std::string> types{"zero",       "linear",      "sine",     "sine_tabulated",
                                           "glm",        "glm_random",  "rkhs_random", "tabulated"};
  if (!types.count(t.type)) r.fail(n["type"].Mark(), "unknown truth type '" + t.type + "'");
}

void parse_system(const Reader& r, const YAML::Node& n, SystemConfig& s) {
  r.check_keys(n,
               {"kind", "truth", "d_x", "d_y", "noise_sigma", "noise_truncation", "state_bound", "init", "burn_in",
                "covariate_sigma", "covariate_scale"},
               "system");
  r.get(n, "kind", s.kind, "system");
  if (s.kind != "autoregressive" && s.kind != "time_series")
    r.fail(n["kind"].Mark(), "system.kind must be autoregressive or time_series");
  if (n["truth"]) parse_truth(r, n["truth"], s.truth);
  r.get(n, "d_x", s.d_x, "system");
  r.get(n, "d_y", s.d_y, "system");
  r.get(n, "noise_sigma", s.noise_sigma, "system");
  r.get(n, "noise_truncation", s.noise_truncation, "system");
  r.get(n, "state_bound", s.state_bound, "system");
  if (const YAML::Node init = n["init"]) {
    if (init.IsSequence()) {
      s.init = "point";
      r.get(n, "init", s.init_point, "system");
    } else {
      r.get(n, "init", s.init, "system");
      if (s.init != "origin" && s.init != "uniform_ball")
        r.fail(init.Mark(), "system.init must be origin, uniform_ball or a list of coordinates");
    }
  }
  r.get(n, "burn_in", s.burn_in, "system");
  r.get(n, "covariate_sigma", s.covariate_sigma, "system");
  r.get(n, "covariate_scale", s.covariate_scale, "system");
}

void parse_class(const Reader& r, const YAML::Node& n, ClassConfig& c) {
  r.check_keys(n, {"type", "L", "lo", "hi", "radius", "bandwidth", "entropy", "link", "C", "size", "perturbation"},
               "class");
  r.get(n, "type", c.type, "class");
  static const std::set<std::string> types{"lipschitz1d", "rkhs_ball", "glm", "finite"};
  if (!types.count(c.type)) r.fail(n["type"].Mark(), "unknown class type '" + c.type + "'");
  r.get(n, "L", c.L, "class");
  r.get(n, "lo", c.lo, "class");
  r.get(n, "hi", c.hi, "class");
  if (const YAML::Node rad = n["radius"]) {
    if (rad.IsScalar() && rad.Scalar() == "truth") {
      c.radius.reset();
    } else if (rad.IsScalar() && (rad.Scalar() == "inf" || rad.Scalar() == ".inf")) {
      c.radius = std::numeric_limits<double>::infinity();
    } else {
      r.get_optional(n, "radius", c.radius, "class");
    }
  }
  r.get(n, "bandwidth", c.bandwidth, "class");
  if (const YAML::Node e = n["entropy"]) {
    r.check_keys(e, {"A", "alpha", "lambda_1", "prefactor"}, "class.entropy");
    r.get(e, "A", c.entropy.A, "class.entropy");
    r.get(e, "alpha", c.entropy.alpha, "class.entropy");
    r.get(e, "lambda_1", c.entropy.lambda_1, "class.entropy");
    r.get(e, "prefactor", c.entropy.prefactor, "class.entropy");
  }
  r.get(n, "link", c.link, "class");
  r.get(n, "C", c.C, "class");
  r.get(n, "size", c.size, "class");
  r.get(n, "perturbation", c.perturbation, "class");
}

void parse_sweep(const Reader& r, const YAML::Node& n, SweepConfig& s) {
  r.check_keys(n, {"T", "replicates", "n_fresh", "systems", "sigma_reps"}, "sweep");
  r.get(n, "T", s.T, "sweep");
  r.get(n, "replicates", s.replicates, "sweep");
  r.get(n, "n_fresh", s.n_fresh, "sweep");
  r.get(n, "systems", s.systems, "sweep");
  r.get(n, "sigma_reps", s.sigma_reps, "sweep");
  if (s.T.empty()) r.fail(n["T"].Mark(), "sweep.T must not be empty");
  for (int T : s.T)
    if (T < 1) r.fail(n["T"].Mark(), "sweep.T entries must be >= 1");
}

void parse_bounds(const Reader& r, const YAML::Node& n, BoundsConfig& b) {
  r.check_keys(n, {"heavy", "parametric", "c_mix", "finite_noise", "finite_proxy", "gamma", "delta", "alpha", "L_star"},
               "bounds");
  r.get(n, "heavy", b.constants.heavy, "bounds");
  r.get(n, "parametric", b.constants.parametric, "bounds");
  r.get(n, "c_mix", b.constants.c_mix, "bounds");
  r.get(n, "finite_noise", b.constants.finite_noise, "bounds");
  r.get(n, "finite_proxy", b.constants.finite_proxy, "bounds");
  r.get_optional(n, "gamma", b.gamma, "bounds");
  r.get_optional(n, "delta", b.delta, "bounds");
  r.get_optional(n, "alpha", b.alpha, "bounds");
  r.get_optional(n, "L_star", b.L_star, "bounds");
}

void parse_output(const Reader& r, const YAML::Node& n, OutputConfig& o) {
  r.check_keys(n, {"dir", "prefix"}, "output");
  r.get(n, "dir", o.dir, "output");
  r.get(n, "prefix", o.prefix, "output");
}

struct Num {
  double v;
};
YAML::Emitter& operator<<(YAML::Emitter& e, Num n) { return e << format_double(n.v); }

struct Nums {
  const std::vector<double>& v;
};
YAML::Emitter& operator<<(YAML::Emitter& e, Nums n) {
  e << YAML::Flow << YAML::BeginSeq;
  for (double x : n.v) e << format_double(x);
  return e << YAML::EndSeq;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source, const ExperimentConfig& base) {
  Reader r(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    r.fail(e.mark, "parse error: " + e.msg);
  }
  ExperimentConfig c = base;
  if (!root || root.IsNull()) return c;
  r.check_keys(root, {"name", "seed", "threads", "system", "class", "sweep", "bounds", "output"}, "");
  r.get(root, "name", c.name, "");
  r.get(root, "seed", c.seed, "");
  r.get(root, "threads", c.threads, "");
  if (root["system"]) parse_system(r, root["system"], c.system);
  if (root["class"]) parse_class(r, root["class"], c.cls);
  if (root["sweep"]) parse_sweep(r, root["sweep"], c.sweep);
  if (root["bounds"]) parse_bounds(r, root["bounds"], c.bounds);
  if (root["output"]) parse_output(r, root["output"], c.output);
  return c;
}

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path, base);
}

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << c.name;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "threads" << YAML::Value << c.threads;

  const SystemConfig& s = c.system;
  e << YAML::Key << "system" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << s.kind;
  e << YAML::Key << "truth" << YAML::Value << YAML::BeginMap;
  const TruthConfig& t = s.truth;
  e << YAML::Key << "type" << YAML::Value << t.type;
  e << YAML::Key << "scale" << YAML::Value << Num{t.scale};
  e << YAML::Key << "link" << YAML::Value << t.link;
  e << YAML::Key << "matrix" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& row : t.matrix) e << Nums{row};
  e << YAML::EndSeq;
  e << YAML::Key << "op_norm" << YAML::Value << Num{t.op_norm};
  e << YAML::Key << "k" << YAML::Value << t.k;
  e << YAML::Key << "rho" << YAML::Value << Num{t.rho};
  e << YAML::Key << "bandwidth" << YAML::Value << Num{t.bandwidth};
  e << YAML::Key << "knots" << YAML::Value << Nums{t.knots};
  e << YAML::Key << "values" << YAML::Value << Nums{t.values};
  e << YAML::EndMap;
  e << YAML::Key << "d_x" << YAML::Value << s.d_x;
  e << YAML::Key << "d_y" << YAML::Value << s.d_y;
  e << YAML::Key << "noise_sigma" << YAML::Value << Num{s.noise_sigma};
  e << YAML::Key << "noise_truncation" << YAML::Value << Num{s.noise_truncation};
  e << YAML::Key << "state_bound" << YAML::Value << Num{s.state_bound};
  if (s.init == "point") e << YAML::Key << "init" << YAML::Value << Nums{s.init_point};
  else e << YAML::Key << "init" << YAML::Value << s.init;
  e << YAML::Key << "burn_in" << YAML::Value << s.burn_in;
  e << YAML::Key << "covariate_sigma" << YAML::Value << Num{s.covariate_sigma};
  e << YAML::Key << "covariate_scale" << YAML::Value << Num{s.covariate_scale};
  e << YAML::EndMap;

  const ClassConfig& k = c.cls;
  e << YAML::Key << "class" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "type" << YAML::Value << k.type;
  e << YAML::Key << "L" << YAML::Value << Num{k.L};
  e << YAML::Key << "lo" << YAML::Value << Num{k.lo};
  e << YAML::Key << "hi" << YAML::Value << Num{k.hi};
  if (!k.radius) e << YAML::Key << "radius" << YAML::Value << "truth";
  else if (std::isinf(*k.radius)) e << YAML::Key << "radius" << YAML::Value << "inf";
  else e << YAML::Key << "radius" << YAML::Value << Num{*k.radius};
  e << YAML::Key << "bandwidth" << YAML::Value << Num{k.bandwidth};
  e << YAML::Key << "entropy" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "A" << YAML::Value << Num{k.entropy.A};
  e << YAML::Key << "alpha" << YAML::Value << Num{k.entropy.alpha};
  e << YAML::Key << "lambda_1" << YAML::Value << Num{k.entropy.lambda_1};
  e << YAML::Key << "prefactor" << YAML::Value << Num{k.entropy.prefactor};
  e << YAML::EndMap;
  e << YAML::Key << "link" << YAML::Value << k.link;
  e << YAML::Key << "C" << YAML::Value << Num{k.C};
  e << YAML::Key << "size" << YAML::Value << k.size;
  e << YAML::Key << "perturbation" << YAML::Value << Num{k.perturbation};
  e << YAML::EndMap;

  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "T" << YAML::Value << YAML::Flow << c.sweep.T;
  e << YAML::Key << "replicates" << YAML::Value << c.sweep.replicates;
  e << YAML::Key << "n_fresh" << YAML::Value << c.sweep.n_fresh;
  e << YAML::Key << "systems" << YAML::Value << c.sweep.systems;
  e << YAML::Key << "sigma_reps" << YAML::Value << c.sweep.sigma_reps;
  e << YAML::EndMap;

  const BoundsConfig& b = c.bounds;
  e << YAML::Key << "bounds" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "heavy" << YAML::Value << Num{b.constants.heavy};
  e << YAML::Key << "parametric" << YAML::Value << Num{b.constants.parametric};
  e << YAML::Key << "c_mix" << YAML::Value << Num{b.constants.c_mix};
  e << YAML::Key << "finite_noise" << YAML::Value << Num{b.constants.finite_noise};
  e << YAML::Key << "finite_proxy" << YAML::Value << Num{b.constants.finite_proxy};
  if (b.gamma) e << YAML::Key << "gamma" << YAML::Value << Num{*b.gamma};
  if (b.delta) e << YAML::Key << "delta" << YAML::Value << Num{*b.delta};
  if (b.alpha) e << YAML::Key << "alpha" << YAML::Value << Num{*b.alpha};
  if (b.L_star) e << YAML::Key << "L_star" << YAML::Value << Num{*b.L_star};
  e << YAML::EndMap;

  e << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "dir" << YAML::Value << c.output.dir;
  e << YAML::Key << "prefix" << YAML::Value << c.output.prefix;
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

Mat random_matrix_with_op_norm(int d, double op_norm, std::uint64_t seed) {
  Stream rng = Stream(seed).fork("matrix");
  Mat a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  Eigen::JacobiSVD<Mat> svd(a);
  return a * (op_norm / svd.singularValues()[0]);
}

SystemSpec build_system(const SystemConfig& c, std::uint64_t seed) {
  SystemSpec s;
  s.kind = c.kind == "time_series" ? SystemKind::TimeSeries : SystemKind::Autoregressive;
  s.d_x = c.d_x;
  s.d_y = c.d_y;
  s.noise_sigma = c.noise_sigma;
  s.noise_truncation = c.noise_truncation;
  s.state_bound = c.state_bound;
  s.burn_in = c.burn_in;
  if (c.init == "uniform_ball") {
    s.init.kind = InitialState::Kind::UniformBall;
  } else if (c.init == "point") {
    s.init.point = Eigen::Map<const Vec>(c.init_point.data(), static_cast<Eigen::Index>(c.init_point.size()));
  }
  s.covariate_sigma = c.covariate_sigma;
  if (c.covariate_scale != 0.0) s.covariate_map = linear_function(c.covariate_scale * Mat::Identity(c.d_x, c.d_x));

  const TruthConfig& t = c.truth;
  const std::uint64_t truth_seed = Stream(seed).fork("truth")();
  if (t.type == "zero") {
    s.truth = zero_function(c.d_x, c.d_y);
  } else if (t.type == "linear") {
    s.truth = linear_function(t.scale * Mat::Identity(c.d_y, c.d_x));
  } else if (t.type == "sine") {
    if (c.d_x != c.d_y) throw ConfigError("system.truth: sine truth needs d_x == d_y");
    const double a = t.scale;
    s.truth = closure(
        c.d_x, c.d_y, [a](VecRef x, Eigen::Ref<Vec> out) { out = a * x.array().sin().matrix(); },
        "sine(scale=" + std::to_string(a) + ")", std::abs(a));
  } else if (t.type == "sine_tabulated") {
    if (c.d_x != 1 || c.d_y != 1) throw ConfigError("system.truth: sine_tabulated truth is one-dimensional");
    const Vec knots = Vec::LinSpaced(65, -c.state_bound, c.state_bound);
    s.truth = piecewise_linear(knots, t.scale * knots.array().sin().matrix());
  } else if (t.type == "glm") {
    const Eigen::Index rows = static_cast<Eigen::Index>(t.matrix.size());
    if (rows == 0) throw ConfigError("system.truth: glm truth needs a matrix");
    Mat a(rows, static_cast<Eigen::Index>(t.matrix[0].size()));
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (static_cast<Eigen::Index>(t.matrix[i].size()) != a.cols()) throw ConfigError("system.truth: ragged matrix");
      for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = t.matrix[i][j];
    }
    s.truth = glm_function(a, parse_link(t.link));
  } else if (t.type == "glm_random") {
    if (c.d_x != c.d_y) throw ConfigError("system.truth: glm_random truth needs d_x == d_y");
    s.truth = glm_function(random_matrix_with_op_norm(c.d_x, t.op_norm, truth_seed), parse_link(t.link));
  } else if (t.type == "rkhs_random") {
    RkhsSystemOptions o;
    o.kernel_bandwidth = t.bandwidth;
    o.noise_sigma = c.noise_sigma;
    o.state_bound = c.state_bound;
    o.burn_in = c.burn_in;
    s.truth = make_random_rkhs_system(c.d_x, t.k, t.rho, truth_seed, o).truth;
  } else if (t.type == "tabulated") {
    if (t.knots.size() != t.values.size() || t.knots.empty())
      throw ConfigError("system.truth: tabulated truth needs equally many knots and values");
    s.truth = piecewise_linear(Eigen::Map<const Vec>(t.knots.data(), static_cast<Eigen::Index>(t.knots.size())),
                               Eigen::Map<const Vec>(t.values.data(), static_cast<Eigen::Index>(t.values.size())));
  } else {
    throw ConfigError("system.truth: unknown type '" + t.type + "'");
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

FiniteClass make_finite_class(const Function& truth, double B, int size, double perturbation, std::uint64_t seed,
                              int knots) {
  if (truth.input_dim() != 1 || truth.output_dim() != 1)
    throw std::invalid_argument("make_finite_class: needs a 1-D truth");
  if (size < 1) throw std::invalid_argument("make_finite_class: size must be >= 1");
  Stream rng = Stream(seed).fork("finite");
  const int truth_index = static_cast<int>(rng.below(static_cast<std::uint64_t>(size)));
  const Vec grid = Vec::LinSpaced(knots, -B, B);
  Vec base(knots);
  for (int i = 0; i < knots; ++i) base[i] = truth(grid[i]);
  FiniteClass cls;
  for (int m = 0; m < size; ++m) {
    if (m == truth_index) {
      cls.members.push_back(truth.as<PiecewiseLinear>() ? truth : piecewise_linear(grid, base));
      continue;
    }
    Function bump = random_lipschitz_function(rng, 1.0, B, -1.0, 1.0, knots - 1);
    Vec values(knots);
    for (int i = 0; i < knots; ++i) values[i] = base[i] + perturbation * bump(grid[i]);
    cls.members.push_back(piecewise_linear(grid, values));
  }
  return cls;
}

HypothesisClass build_class(const ClassConfig& c, const SystemSpec& system, std::uint64_t seed) {
  HypothesisClass h;
  h.domain_bound = system.state_bound;
  if (c.type == "lipschitz1d") {
    h.variant = Lipschitz1DClass{c.L, c.lo, c.hi};
  } else if (c.type == "rkhs_ball") {
    RkhsBallClass r;
    r.kernel = GaussianKernel{c.bandwidth};
    r.d_x = system.d_x;
    r.d_y = system.d_y;
    r.entropy = c.entropy;
    if (c.radius) {
      r.radius = *c.radius;
    } else {
      const auto* k = system.truth.as<KernelExpansion>();
      if (!k) throw ConfigError("class.radius: 'truth' needs a kernel-expansion truth");
      r.radius = k->hilbert_norm();
    }
    h.variant = r;
  } else if (c.type == "glm") {
    h.variant = GlmClass{parse_link(c.link), c.C, system.d_x};
  } else if (c.type == "finite") {
    if (!system.truth.as<PiecewiseLinear>())
      throw ConfigError("class: a finite class needs a tabulated truth (tabulated or sine_tabulated)");
    h.variant = make_finite_class(system.truth, system.state_bound, c.size, c.perturbation,
                                  Stream(seed).fork("class")());
  } else {
    throw ConfigError("class: unknown type '" + c.type + "'");
  }
  try {
    h.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return h;
}

}  // namespace nplse
