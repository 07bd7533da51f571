// Counter-based random streams.
//
// Every stream is identified by (seed, label). The label is hashed with
// 64-bit FNV-1a, mixed into the seed with SplitMix64, and draw k of the
// stream is SplitMix64(key + k * 0x9E3779B97F4A7C15). Uniforms use the top
// 53 bits; normals use Box-Muller on two consecutive uniforms (cosine branch
// only), so a stream is reproducible in any language from this description.

#pragma once

#include <cstdint>
#include <string_view>

#include "dlap/linalg.hpp"

namespace dlap {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view label);

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view label);

  std::uint64_t next_u64();
  // Uniform on (0, 1).
  double uniform();
  double normal();
  Vec complex_normal(Eigen::Index n);
  // Unit-norm complex Gaussian vector.
  Vec unit_vector(Eigen::Index n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace dlap
