#pragma once

#include "nplse/types.hpp"

#include <cstdint>
#include <limits>
#include <string_view>

namespace nplse {

/// Counter-based random stream.
///
/// The n-th output is a pure function of (key, n), so a stream can be forked
/// into named or indexed children without consuming any of the parent's
/// outputs. Replicate `r` of an experiment always sees the same numbers no
/// matter how many replicates run or in which order.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  Stream fork(std::string_view name) const;
  Stream fork(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller on two fresh uniforms; no cached state.
  double normal();
  std::uint64_t below(std::uint64_t n);
  Vec normal_vector(int dim);

 private:
  Stream(std::uint64_t key, bool);

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Gaussian draw of scale `sigma` in R^dim, redrawn until its Euclidean norm
/// is at most `radius`. Returns zero when sigma == 0.
Vec truncated_gaussian(Stream& rng, int dim, double sigma, double radius);

/// Uniform draw from the closed Euclidean ball of the given radius.
Vec uniform_in_ball(Stream& rng, int dim, double radius);

}  // namespace nplse
