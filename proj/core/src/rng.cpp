#include "nplse/rng.hpp"

#include <cmath>
#include <numbers>

namespace nplse {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a, only used to turn stream names into 64-bit tags.
std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

Stream::Stream(std::uint64_t seed) : key_(mix64(seed + kGolden)) {}

Stream::Stream(std::uint64_t key, bool) : key_(key) {}

Stream::result_type Stream::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

Stream Stream::fork(std::string_view name) const {
  return Stream(mix64(key_ ^ mix64(hash_name(name))), true);
}

Stream Stream::fork(std::uint64_t index) const {
  return Stream(mix64(key_ ^ mix64(index * kGolden + 0x632BE59BD9B4E019ULL)), true);
}

double Stream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Stream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Stream::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Stream::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t r;
  do {
    r = (*this)();
  } while (r >= limit);
  return r % n;
}

Vec Stream::normal_vector(int dim) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal();
  return v;
}

Vec truncated_gaussian(Stream& rng, int dim, double sigma, double radius) {
  if (sigma == 0.0) return Vec::Zero(dim);
  Vec w(dim);
  do {
    for (int i = 0; i < dim; ++i) w[i] = sigma * rng.normal();
  } while (w.norm() > radius);
  return w;
}

Vec uniform_in_ball(Stream& rng, int dim, double radius) {
  Vec dir = rng.normal_vector(dim);
  double n = dir.norm();
  while (n == 0.0) {
    dir = rng.normal_vector(dim);
    n = dir.norm();
  }
  const double r = radius * std::pow(rng.uniform(), 1.0 / dim);
  return dir * (r / n);
}

}  // namespace nplse
