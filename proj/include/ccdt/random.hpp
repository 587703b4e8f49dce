#pragma once

#include <cstdint>
#include <iterator>
#include <random>
#include <string_view>
#include <utility>

namespace ccdt {

// mt19937_64 output is fully specified by the standard; the distribution
// helpers below are written out so generated data does not depend on the
// standard library implementation.
using Rng = std::mt19937_64;

/// Derives an independent seed for a named stage from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stage);

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [0, n). n must be positive.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

template <class RandomIt>
void shuffle(RandomIt first, RandomIt last, Rng& rng) {
  auto n = static_cast<std::uint64_t>(std::distance(first, last));
  for (std::uint64_t i = n; i > 1; --i) {
    std::uint64_t j = uniform_index(rng, i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace ccdt
