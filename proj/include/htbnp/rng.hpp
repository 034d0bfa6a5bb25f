#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include "htbnp/special.hpp"

namespace htbnp {

/// Name of the generator scheme recorded in run manifests. Raw bits come from
/// std::mt19937_64 (output sequence fixed by the C++ standard); uniforms map
/// the top 53 bits to (0,1); all non-uniform draws go through inverse CDFs so
/// that a given seed yields the same stream on any conforming platform.
inline constexpr const char* kRngAlgorithm = "mt19937_64/inv-cdf/v1";

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic seed splitter: stream i of a run with master seed s is
/// seeded with derive_seed(s, i). Used for parallel coordinates, grid cells
/// and replicate seeds so that results do not depend on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
  splitmix64(s);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0,1): 53-bit mantissa, offset by half an
  /// ulp so neither endpoint is reachable (keeps inverse CDFs finite).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the AS241 inverse CDF.
  double normal() { return normal_quantile(uniform()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace htbnp
