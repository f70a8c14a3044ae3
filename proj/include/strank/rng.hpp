#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "strank/text.hpp"

namespace strank {

// All randomized code in this project draws through these helpers so that
// artifacts are reproducible from a single seed on every platform. The
// distributions are hand-rolled because the standard library's are allowed
// to differ between implementations.

inline std::mt19937_64 seeded_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// Derives an independent stream from (seed, tag), e.g. per query or per epoch.
inline std::mt19937_64 derived_rng(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = fnv1a64(tag);
  return std::mt19937_64(seed ^ (h + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2)));
}

// Uniform integer in [0, n) by rejection sampling; n must be > 0.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform double in [0, 1) with 53 bits of randomness.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Uniform double in [lo, hi).
inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Fisher-Yates with the deterministic integer sampler above.
template <typename T>
void shuffle_in_place(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace strank
