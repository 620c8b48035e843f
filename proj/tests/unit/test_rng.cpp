#include "nplse/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace nplse;

TEST_SUITE("rng") {
  TEST_CASE("same seed gives the same sequence") {
    Stream a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a() == b());
  }

  TEST_CASE("forks do not consume the parent") {
    Stream a(7), b(7);
    (void)a.fork("noise");
    (void)a.fork(3);
    CHECK(a() == b());
    CHECK(a.position() == 1);
  }

  TEST_CASE("forks are distinct and stable") {
    Stream s(1);
    CHECK(s.fork("train")() != s.fork("fresh")());
    CHECK(s.fork(0)() != s.fork(1)());
    CHECK(s.fork("train")() == Stream(1).fork("train")());
    CHECK(s.fork("a").fork(2)() == Stream(1).fork("a").fork(2)());
  }

  TEST_CASE("uniform moments") {
    Stream s(3);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = s.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
      sq += u * u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sq / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12).epsilon(0.02));
  }

  TEST_CASE("normal moments") {
    Stream s(4);
    const int n = 200000;
    double sum = 0.0, sq = 0.0, q4 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = s.normal();
      sum += z;
      sq += z * z;
      q4 += z * z * z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(q4 / n == doctest::Approx(3.0).epsilon(0.05));
  }

  TEST_CASE("below is uniform over its range") {
    Stream s(5);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
      const auto k = s.below(7);
      REQUIRE(k < 7);
      ++counts[k];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
    CHECK(s.below(1) == 0);
  }

  TEST_CASE("truncated gaussian respects its radius") {
    Stream s(6);
    for (int i = 0; i < 10000; ++i) CHECK(truncated_gaussian(s, 3, 1.0, 1.5).norm() <= 1.5);
    CHECK(truncated_gaussian(s, 2, 0.0, 1.0).norm() == 0.0);
  }

  TEST_CASE("uniform ball draws stay in the ball and fill it") {
    Stream s(8);
    int inner = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const Vec v = uniform_in_ball(s, 2, 2.0);
      REQUIRE(v.norm() <= 2.0);
      if (v.norm() <= 1.0) ++inner;
    }
    // area ratio of the unit disc to the radius-2 disc
    CHECK(static_cast<double>(inner) / n == doctest::Approx(0.25).epsilon(0.05));
  }
}
