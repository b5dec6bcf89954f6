// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "durhaz/io.hpp"

namespace durhaz {

// Deterministic random source. mt19937_64's output sequence is fixed by the
// standard, and all distribution shaping is done here rather than through the
// implementation-defined std::*_distribution classes, so any (seed, call
// sequence) pair produces the same draws on every platform and compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() {
    // 53 random mantissa bits.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1); never returns an exact 0.
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [lo, hi], inclusive. Rejection keeps it unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(engine_());  // full span
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return lo + static_cast<std::int64_t>(draw % range);
  }

  /// Standard normal via Box-Muller. Stateless: the paired draw is discarded
  /// so the stream position depends only on the call count.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a purpose tag (splitmix-style finisher), so
/// separate consumers of one master seed get decorrelated streams.
inline std::uint64_t derive_seed(std::uint64_t base, const std::string& tag) {
  std::uint64_t z = base ^ fnv1a64(tag.data(), tag.size());
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, const std::string& tag, std::uint64_t n) {
  return derive_seed(base, tag + ":" + std::to_string(n));
}

}  // namespace durhaz
