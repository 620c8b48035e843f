#include "nplse/config.hpp"
#include "nplse/estimators.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

using namespace nplse;

namespace {

double naive_training_error(const Function& f, const Trajectory& tr) {
  double s = 0.0;
  for (int t = 0; t < tr.T(); ++t)
    for (int j = 0; j < tr.outputs.cols(); ++j) {
      const double r = tr.outputs(t, j) - f(Vec(tr.states.row(t).transpose()))[j];
      s += r * r;
    }
  return s / tr.T();
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("training error") {
    Trajectory tr;
    tr.states = Samples::Random(7, 1);
    tr.outputs = Samples::Ones(7, 1);
    CHECK(training_error(zero_function(1, 1), tr) == 1.0);

    const SystemSpec s = build_system(SystemConfig{.truth = {.type = "sine"}, .noise_sigma = 0.0}, 1);
    CHECK(training_error(s.truth, simulate(s, 50, 2)) == 0.0);

    gen::Gen g(1);
    for (int rep = 0; rep < 100; ++rep) {
      const int d = g.integer(1, 3);
      Trajectory r;
      r.states.resize(g.integer(1, 40), d);
      r.outputs.resize(r.states.rows(), d);
      for (int i = 0; i < r.states.size(); ++i) r.states.data()[i] = g.normal();
      for (int i = 0; i < r.outputs.size(); ++i) r.outputs.data()[i] = g.normal();
      Mat a(d, d);
      for (int i = 0; i < d * d; ++i) a(i / d, i % d) = g.normal();
      const Function f = glm_function(a, Link::Tanh);
      CHECK(training_error(f, r) == doctest::Approx(naive_training_error(f, r)).epsilon(1e-12));
    }
  }

  TEST_CASE("finite class") {
    gen::Gen g(2);
    const Function truth = g.lipschitz_function(1.0, 1.0, -1.0, 1.0);
    Trajectory noiseless = gen::scalar_regression_data(g, 40, 0.0, truth);
    CHECK(lse_finite(FiniteClass{{truth}}, noiseless).member_index == 0);

    std::vector<Function> members;
    for (int i = 0; i < 5; ++i) members.push_back(g.lipschitz_function(1.0, 1.0, -1.0, 1.0));
    members.insert(members.begin() + 3, truth);
    const FittedModel m = lse_finite(FiniteClass{members}, noiseless);
    CHECK(m.member_index == 3);
    CHECK(m.diagnostics.objective == 0.0);

    for (int rep = 0; rep < 20; ++rep) {
      const Trajectory tr = gen::scalar_regression_data(g, 30, 0.5, truth);
      const FittedModel fit = lse_finite(FiniteClass{members}, tr);
      for (const auto& f : members) CHECK(fit.diagnostics.objective <= naive_training_error(f, tr) + 1e-15);
    }
    // ties resolve to the first member
    CHECK(lse_finite(FiniteClass{{truth, truth}}, noiseless).member_index == 0);
  }

  TEST_CASE("lipschitz chain solver matches a generic QP") {
    gen::Gen g(3);
    for (int rep = 0; rep < 200; ++rep) {
      const int n = g.integer(1, 12);
      Vec y(n), w(n), gaps(n > 0 ? n - 1 : 0);
      for (int i = 0; i < n; ++i) {
        y[i] = 2.0 * g.normal();
        w[i] = g.integer(1, 4);
      }
      for (int i = 0; i + 1 < n; ++i) gaps[i] = g.uniform(0.0, 0.5);
      const double lo = -g.uniform(0.2, 2.0), hi = g.uniform(0.2, 2.0);
      const Vec theta = solve_lipschitz_chain(y, w, gaps, lo, hi);

      Mat Q = Mat(w.asDiagonal()) * 2.0;
      Vec c = -2.0 * w.cwiseProduct(y);
      const int m = 2 * (n - 1) + 2 * n;
      Mat A = Mat::Zero(m, n);
      Vec b(m);
      int r = 0;
      for (int k = 0; k + 1 < n; ++k) {
        A(r, k + 1) = 1.0, A(r, k) = -1.0, b[r++] = gaps[k];
        A(r, k + 1) = -1.0, A(r, k) = 1.0, b[r++] = gaps[k];
      }
      for (int k = 0; k < n; ++k) {
        A(r, k) = 1.0, b[r++] = hi;
        A(r, k) = -1.0, b[r++] = -lo;
      }
      const Vec ref = oracle::active_set_qp(Q, c, A, b, Vec::Zero(n));
      const auto obj = [&](const Vec& t) { return 0.5 * t.dot(Q * t) + c.dot(t); };
      CHECK(obj(theta) == doctest::Approx(obj(ref)).epsilon(1e-9).scale(1.0));
      CHECK((A * theta - b).maxCoeff() <= 1e-12);
    }
  }

  TEST_CASE("lipschitz LSE") {
    gen::Gen g(4);
    SUBCASE("interpolates noiseless in-class data") {
      const Function truth = g.lipschitz_function(1.0, 1.0, -1.0, 1.0);
      const Trajectory tr = gen::scalar_regression_data(g, 60, 0.0, truth);
      const FittedModel m = lse_lipschitz1d(tr, 1.0, -1.0, 1.0);
      for (int t = 0; t < tr.T(); ++t) CHECK(m.f(tr.states(t, 0)) == doctest::Approx(tr.outputs(t, 0)).epsilon(1e-12));
      CHECK(m.diagnostics.objective <= 1e-24);
    }
    SUBCASE("zero slope gives the clamped mean") {
      const Trajectory tr = gen::scalar_regression_data(g, 40, 0.3, constant_function(0.2));
      double mean = 0.0;
      for (int t = 0; t < tr.T(); ++t) mean += tr.outputs(t, 0) / tr.T();
      const FittedModel m = lse_lipschitz1d(tr, 0.0, -1.0, 1.0);
      CHECK(m.f(0.0) == doctest::Approx(mean).epsilon(1e-12));
      CHECK(lse_lipschitz1d(tr, 0.0, -1.0, 0.0).f(0.3) == doctest::Approx(std::min(mean, 0.0)));
    }
    SUBCASE("objective matches the generic QP at T = 25") {
      for (int rep = 0; rep < 20; ++rep) {
        const Function truth = g.lipschitz_function(2.0, 1.0, -1.0, 1.0);
        const Trajectory tr = gen::scalar_regression_data(g, 25, 0.4, truth);
        const double L = g.uniform(0.2, 1.5);
        const FittedModel m = lse_lipschitz1d(tr, L, -1.0, 1.0);
        CHECK(std::abs(m.diagnostics.objective - oracle::lipschitz_qp_objective(tr, L, -1.0, 1.0)) <= 1e-6);
        CHECK(membership_violation(m).empty());
      }
    }
    SUBCASE("relaxing L never increases the objective") {
      for (int rep = 0; rep < 20; ++rep) {
        const Trajectory tr = gen::scalar_regression_data(g, 80, 0.5, g.lipschitz_function(1.0, 1.0, -1.0, 1.0));
        double prev = std::numeric_limits<double>::infinity();
        for (double L : {0.5, 1.0, 2.0}) {
          const double obj = lse_lipschitz1d(tr, L, -2.0, 2.0).diagnostics.objective;
          CHECK(obj <= prev + 1e-12);
          prev = obj;
        }
      }
    }
    SUBCASE("repeated design points are pooled") {
      Trajectory tr;
      tr.states = (Samples(4, 1) << 0.0, 0.0, 1.0, 1.0).finished();
      tr.outputs = (Samples(4, 1) << 1.0, 3.0, 0.0, 0.0).finished();
      const FittedModel m = lse_lipschitz1d(tr, 10.0, -5.0, 5.0);
      CHECK(m.design_x.size() == 2);
      CHECK(m.f(0.0) == doctest::Approx(2.0));
    }
  }

  TEST_CASE("kernel ridge LSE") {
    gen::Gen g(5);
    SUBCASE("zero targets") {
      Trajectory tr = gen::scalar_regression_data(g, 20, 0.0, zero_function(1, 1));
      const FittedModel m = lse_kernel_ridge(tr, GaussianKernel{1.0}, 1.0);
      CHECK(m.dual_coeffs.cwiseAbs().maxCoeff() == 0.0);
      CHECK(m.f(0.3) == 0.0);
    }
    SUBCASE("infinite radius interpolates a well-conditioned Gram matrix") {
      Trajectory tr;
      tr.states.resize(10, 1);
      tr.outputs.resize(10, 1);
      for (int i = 0; i < 10; ++i) {
        tr.states(i, 0) = -3.0 + 6.0 * i / 9.0;
        tr.outputs(i, 0) = g.normal();
      }
      const FittedModel m = lse_kernel_ridge(tr, GaussianKernel{0.5}, std::numeric_limits<double>::infinity());
      for (int i = 0; i < 10; ++i) CHECK(std::abs(m.f(tr.states(i, 0)) - tr.outputs(i, 0)) <= 1e-6);
    }
    SUBCASE("bisection matches a lambda grid scan") {
      for (int rep = 0; rep < 5; ++rep) {
        const Trajectory tr = gen::scalar_regression_data(g, 30, 0.3, g.lipschitz_function(1.0, 1.0, -1.0, 1.0));
        const GaussianKernel k{0.4};
        Mat K(30, 30);
        for (int i = 0; i < 30; ++i)
          for (int j = 0; j < 30; ++j) K(i, j) = k(tr.states.row(i).transpose(), tr.states.row(j).transpose());
        const FittedModel full = lse_kernel_ridge(tr, k, std::numeric_limits<double>::infinity());
        const double radius = 0.3 * full.hilbert_norm;
        const FittedModel m = lse_kernel_ridge(tr, k, radius);
        CHECK(membership_violation(m).empty());

        // norm(mu) decreases in mu; take the smallest grid mu whose norm fits the ball
        double scan_norm = 0.0;
        for (int i = 0; i <= 6000; ++i) {
          const double mu = std::pow(10.0, -16.0 + 20.0 * i / 6000.0);
          const Mat c = (K + (m.jitter + mu) * Mat::Identity(30, 30)).llt().solve(Mat(tr.outputs));
          const double norm = std::sqrt((c.transpose() * K * c).trace());
          if (norm <= radius) {
            scan_norm = norm;
            break;
          }
        }
        CHECK(std::abs(m.hilbert_norm - scan_norm) <= 0.01 * scan_norm);
      }
    }
    SUBCASE("multi-output fits share the ball") {
      RkhsSystemOptions o;
      o.burn_in = 50;
      const SystemSpec s = make_random_rkhs_system(3, 40, 0.9, 3, o);
      const Trajectory tr = simulate(s, 60, 4);
      const double r = s.truth.as<KernelExpansion>()->hilbert_norm();
      const FittedModel m = lse_kernel_ridge(tr, GaussianKernel{1.0}, r);
      CHECK(membership_violation(m).empty());
      CHECK(m.diagnostics.objective <= training_error(s.truth, tr) + 1e-6);
    }
  }

  TEST_CASE("glm LSE") {
    gen::Gen g(6);
    SUBCASE("identity link reproduces least squares") {
      const int T = 200, d = 3;
      Trajectory tr;
      tr.states.resize(T, d);
      tr.outputs.resize(T, d);
      for (int i = 0; i < tr.states.size(); ++i) tr.states.data()[i] = g.normal();
      Mat A(d, d);
      for (int i = 0; i < d * d; ++i) A(i / d, i % d) = 0.2 * g.normal();
      for (int t = 0; t < T; ++t)
        tr.outputs.row(t) = (A * tr.states.row(t).transpose() + 0.1 * g.normal_vector(d)).transpose();
      const Mat X = tr.states, Y = tr.outputs;
      const Mat ols = (X.transpose() * X).ldlt().solve(X.transpose() * Y).transpose();
      REQUIRE(ols.norm() < 5.0);
      const FittedModel m = lse_glm(tr, Link::Identity, 5.0);
      CHECK((m.matrix - ols).cwiseAbs().maxCoeff() <= 1e-6);
    }
    SUBCASE("zero outputs give the zero matrix") {
      Trajectory tr;
      tr.states = Samples::Random(30, 2);
      tr.outputs = Samples::Zero(30, 2);
      CHECK(lse_glm(tr, Link::Tanh, 1.0).matrix.norm() == 0.0);
    }
    SUBCASE("noiseless tanh data is fit to zero objective") {
      SystemConfig sc;
      sc.truth.type = "glm_random";
      sc.truth.op_norm = 0.8;
      sc.d_x = sc.d_y = 3;
      sc.noise_sigma = 0.0;
      sc.state_bound = 2.0;
      sc.init = "uniform_ball";
      SystemSpec s = build_system(sc, 7);
      s.kind = SystemKind::TimeSeries;
      s.covariate_sigma = 0.8;
      const Trajectory tr = simulate(s, 500, 8);
      const double C = s.truth.as<GlmMap>()->matrix().norm() * 1.5;
      const FittedModel m = lse_glm(tr, Link::Tanh, C);
      CHECK(m.diagnostics.objective <= 1e-10);
      CHECK(membership_violation(m).empty());
    }
    SUBCASE("active constraint") {
      const Trajectory tr = gen::scalar_regression_data(g, 100, 0.1, scalar_linear(2.0));
      const FittedModel m = lse_glm(tr, Link::Identity, 0.5);
      CHECK(m.matrix(0, 0) == doctest::Approx(0.5));
      CHECK(membership_violation(m).empty());
    }
  }

  TEST_CASE("every estimator beats the truth on its own data") {
    gen::Gen g(7);
    for (int rep = 0; rep < 5; ++rep) {
      {
        const Function truth = g.lipschitz_function(1.0, 1.0, -1.0, 1.0);
        const Trajectory tr = gen::scalar_regression_data(g, 100, 0.3, truth);
        HypothesisClass h{Lipschitz1DClass{1.0, -1.0, 1.0}, 1.0};
        CHECK(fit(h, tr).diagnostics.objective <= training_error(truth, tr) + 1e-12);
      }
      {
        SystemConfig sc;
        sc.truth.type = "glm_random";
        sc.d_x = sc.d_y = 2;
        sc.state_bound = 2.0;
        sc.noise_sigma = 0.3;
        const SystemSpec s = build_system(sc, g.seed());
        const Trajectory tr = simulate(s, 200, g.seed());
        HypothesisClass h{GlmClass{Link::Tanh, 2.0, 2}, 2.0};
        CHECK(fit(h, tr).diagnostics.objective <= training_error(s.truth, tr) + 1e-8);
      }
      {
        RkhsSystemOptions o;
        o.burn_in = 20;
        o.noise_sigma = 0.3;
        const SystemSpec s = make_random_rkhs_system(2, 30, 0.9, g.seed(), o);
        const Trajectory tr = simulate(s, 80, g.seed());
        const double r = s.truth.as<KernelExpansion>()->hilbert_norm();
        HypothesisClass h{RkhsBallClass{GaussianKernel{1.0}, r, 2, 2, {}}, 10.0};
        // the ball fit is exact up to the 1% radius tolerance of the bisection
        const FittedModel m = fit(h, tr);
        CHECK(membership_violation(m).empty());
        CHECK(m.hilbert_norm >= 0.99 * r * (1 - 1e-9));
        CHECK(m.diagnostics.objective <= training_error(s.truth, tr) + 1e-3);
      }
    }
  }

  TEST_CASE("model artifacts round trip") {
    gen::Gen g(8);
    const Trajectory tr = gen::scalar_regression_data(g, 40, 0.3, g.lipschitz_function(1.0, 1.0, -1.0, 1.0));
    std::vector<FittedModel> models{
        lse_lipschitz1d(tr, 1.0, -1.0, 1.0),
        lse_kernel_ridge(tr, GaussianKernel{0.5}, 1.0),
        lse_glm(tr, Link::Tanh, 1.0),
        lse_finite(FiniteClass{{g.lipschitz_function(1.0, 1.0, -1.0, 1.0)}}, tr),
    };
    for (const auto& m : models) {
      std::stringstream ss;
      write_model(ss, m);
      const FittedModel back = read_model(ss);
      CHECK(back.class_tag == m.class_tag);
      for (double x : {-1.3, -0.5, 0.0, 0.77, 1.2}) CHECK(back.f(x) == m.f(x));
    }
  }
}
