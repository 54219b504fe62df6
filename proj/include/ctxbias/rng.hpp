#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ctxbias {

// All randomized operations in the toolkit draw from an explicitly seeded
// mt19937_64 through the helpers below, never through std::*_distribution,
// so that a given seed produces the same stream on every platform.
using Rng = std::mt19937_64;

inline Rng make_rng(uint64_t seed) { return Rng(seed); }

// Mixes a seed with a stream id; used to derive independent sub-streams.
uint64_t splitmix64(uint64_t x);

// Uniform double in [0, 1) with 53 significant bits.
inline double rand_u01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased uniform integer in [0, n). n must be > 0.
uint64_t rand_below(Rng& rng, uint64_t n);

// Fisher-Yates permutation of 0..n-1.
std::vector<size_t> random_permutation(size_t n, Rng& rng);

template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rand_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace ctxbias
