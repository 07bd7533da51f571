#include "dlap/rng.hpp"

#include <cmath>
#include <numbers>

namespace dlap {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

CounterRng::CounterRng(std::uint64_t seed, std::string_view label)
    : key_(splitmix64(seed ^ fnv1a64(label))) {}

std::uint64_t CounterRng::next_u64() {
  return splitmix64(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL);
}

double CounterRng::uniform() {
  // (k + 0.5) / 2^53 keeps the value strictly inside (0, 1).
  const std::uint64_t k = next_u64() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec CounterRng::complex_normal(Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = normal();
    const double im = normal();
    v[i] = cd(re, im);
  }
  return v;
}

Vec CounterRng::unit_vector(Eigen::Index n) {
  Vec v = complex_normal(n);
  return v / v.norm();
}

}  // namespace dlap
