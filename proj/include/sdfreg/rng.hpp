// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <string_view>

#include <Eigen/Core>

namespace sdfreg {

/// @brief Small deterministic PRNG (splitmix64 core).
///
/// Results are identical on every platform and compiler, which std::
/// distributions do not guarantee. All randomized components take either a
/// seed or an Rng so that whole experiments replay bit-identically.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform 3-vector with each component in [-1, 1).
  Eigen::Vector3d uniform_box3() {
    const double x = uniform(-1.0, 1.0);
    const double y = uniform(-1.0, 1.0);
    const double z = uniform(-1.0, 1.0);
    return {x, y, z};
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free modulo is fine here; n is tiny relative to 2^64.
    return next_u64() % n;
  }

  /// Derives an independent child stream. Forking with the same label from
  /// the same parent state always yields the same stream.
  Rng fork(std::uint64_t label) {
    const std::uint64_t base = next_u64();
    return Rng(base ^ (0x2545f4914f6cdd1dULL * (label + 1)));
  }

private:
  std::uint64_t state_;
};

/// FNV-1a hash, used to derive seeds from string identifiers.
inline std::uint64_t hash_label(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sdfreg
