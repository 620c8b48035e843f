#include "nplse/config.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

using namespace nplse;

namespace {

const char* kDocument = R"(name: roundtrip
seed: 42
threads: 2
system:
  kind: autoregressive
  truth:
    type: sine_tabulated
    scale: 0.7
  noise_sigma: 0.1
  state_bound: 1
  init: [0.25]
class:
  type: finite
  size: 8
  perturbation: 0.2
sweep:
  T: [64, 128, 256]
  replicates: 3
  n_fresh: 100
bounds:
  L_star: 0.7
  gamma: 0.01
output:
  dir: out
  prefix: rt
)";

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "doc.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("parse reads every section") {
    const ExperimentConfig c = parse_config(kDocument);
    CHECK(c.name == "roundtrip");
    CHECK(c.seed == 42);
    CHECK(c.threads == 2);
    CHECK(c.system.truth.type == "sine_tabulated");
    CHECK(c.system.init == "point");
    CHECK(c.system.init_point == std::vector<double>{0.25});
    CHECK(c.cls.type == "finite");
    CHECK(c.cls.size == 8);
    CHECK(c.sweep.T == std::vector<int>{64, 128, 256});
    CHECK(*c.bounds.L_star == 0.7);
    CHECK(*c.bounds.gamma == 0.01);
    CHECK_FALSE(c.bounds.delta.has_value());
    CHECK(c.output.prefix == "rt");
  }

  TEST_CASE("serialization is idempotent after the first pass") {
    const std::string once = serialize_config(parse_config(kDocument));
    const std::string twice = serialize_config(parse_config(once));
    CHECK(once == twice);
    CHECK(once.find("0.69999") == std::string::npos);

    ExperimentConfig c;
    c.cls.type = "rkhs_ball";
    c.cls.radius = std::numeric_limits<double>::infinity();
    CHECK(std::isinf(*parse_config(serialize_config(c)).cls.radius));
    c.cls.radius.reset();
    CHECK_FALSE(parse_config(serialize_config(c)).cls.radius.has_value());
  }

  TEST_CASE("documents overlay a base config") {
    ExperimentConfig base;
    base.seed = 9;
    base.sweep.n_fresh = 777;
    const ExperimentConfig c = parse_config("sweep:\n  replicates: 4\n", "x", base);
    CHECK(c.seed == 9);
    CHECK(c.sweep.n_fresh == 777);
    CHECK(c.sweep.replicates == 4);
  }

  TEST_CASE("unknown keys are rejected with their line") {
    const std::string e = error_of("seed: 1\nsystem:\n  noise_sigma: 0.1\n  noise_sigmaa: 0.2\n");
    CHECK(e.find("doc.yaml:4") != std::string::npos);
    CHECK(e.find("unknown key 'system.noise_sigmaa'") != std::string::npos);
    CHECK(error_of("bogus: 1\n").find("unknown key 'bogus'") != std::string::npos);
  }

  TEST_CASE("bad values name the key") {
    CHECK(error_of("sweep:\n  T: [1, two]\n").find("sweep.T") != std::string::npos);
    CHECK(error_of("class:\n  type: spline\n").find("unknown class type") != std::string::npos);
    CHECK(error_of("system:\n  truth:\n    type: cubic\n").find("doc.yaml:3") != std::string::npos);
    CHECK_FALSE(error_of("sweep:\n  T: []\n").empty());
    CHECK_FALSE(error_of("system: [1, 2]\n").empty());
    CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);
  }

  TEST_CASE("shipped config documents load and build") {
    int n = 0;
    for (const auto& e : std::filesystem::directory_iterator(NPLSE_CONFIG_DIR)) {
      if (e.path().extension() != ".yaml") continue;
      CAPTURE(e.path().string());
      const ExperimentConfig c = load_config(e.path().string());
      CHECK(parse_config(serialize_config(c)).seed == c.seed);
      const SystemSpec spec = build_system(c.system, c.seed);
      CHECK_NOTHROW(build_class(c.cls, spec, c.seed));
      ++n;
    }
    CHECK(n >= 4);
  }

  TEST_CASE("build system and class") {
    const ExperimentConfig c = parse_config(kDocument);
    const SystemSpec s = build_system(c.system, c.seed);
    CHECK(s.truth.as<PiecewiseLinear>() != nullptr);
    CHECK(s.truth(0.5) == doctest::Approx(0.7 * std::sin(0.5)).epsilon(1e-3));
    const HypothesisClass h = build_class(c.cls, s, c.seed);
    const auto& members = std::get<FiniteClass>(h.variant).members;
    CHECK(members.size() == 8);
    int same = 0;
    for (const auto& m : members) same += m.as<PiecewiseLinear>() == s.truth.as<PiecewiseLinear>();
    CHECK(same == 1);

    SystemConfig sine;
    sine.truth.type = "sine";
    ClassConfig fin;
    fin.type = "finite";
    CHECK_THROWS_AS(build_class(fin, build_system(sine, 1), 1), ConfigError);

    SystemConfig bad;
    bad.truth.type = "linear";
    bad.d_y = 2;
    CHECK_THROWS_AS(build_system(bad, 1), ConfigError);
  }

  TEST_CASE("random truths are seeded") {
    SystemConfig k;
    k.truth.type = "rkhs_random";
    k.truth.k = 30;
    k.d_x = k.d_y = 2;
    const SystemSpec a = build_system(k, 5), b = build_system(k, 5), d = build_system(k, 6);
    const Vec x = Vec::Constant(2, 0.3);
    CHECK(a.truth(x) == b.truth(x));
    CHECK(a.truth(x) != d.truth(x));

    ClassConfig r;
    r.type = "rkhs_ball";
    const HypothesisClass h = build_class(r, a, 5);
    CHECK(std::get<RkhsBallClass>(h.variant).radius ==
          doctest::Approx(a.truth.as<KernelExpansion>()->hilbert_norm()));
  }

  TEST_CASE("random matrix has the requested operator norm") {
    const Mat a = random_matrix_with_op_norm(4, 0.8, 3);
    CHECK(Eigen::JacobiSVD<Mat>(a).singularValues()[0] == doctest::Approx(0.8).epsilon(1e-12));
  }
}
