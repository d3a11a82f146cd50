// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace segloop {

/// Mixes a 64-bit value into a well-spread seed (splitmix64 finalizer).
/// Used to derive independent per-tree / per-segment / per-scan streams
/// from one run seed.
inline std::uint64_t mix_seed(std::uint64_t v) {
  v += 0x9e3779b97f4a7c15ULL;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
  return v ^ (v >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(a ^ mix_seed(b));
}

/// Seeded generator built on std::mt19937_64, whose output sequence is
/// fixed by the standard. The bounded/uniform mappings below are written
/// out explicitly because the std::*_distribution classes are
/// implementation-defined and would break cross-platform reproducibility.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform integer in [0, n). n must be > 0. Rejection sampling keeps
  /// the result exactly uniform and platform-independent.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t min = (0ULL - n) % n;  // 2^64 mod n
    std::uint64_t r;
    do {
      r = gen_();
    } while (r < min);
    return r % n;
  }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  /// Standard normal via Box-Muller (deterministic, no std distribution).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mag * std::cos(ang);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace segloop
