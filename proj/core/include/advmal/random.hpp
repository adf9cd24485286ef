#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace advmal {

// Engine used everywhere a seed is accepted. The helpers below avoid the
// standard distributions, whose output is implementation-defined, so seeded
// runs replay identically across standard libraries.
using Rng = std::mt19937_64;

/// Mixes `seed` and a stream id into an independent child seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Uniform integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Uniform real in [0, 1) with 53 random bits.
double uniform_unit(Rng& rng);

bool bernoulli(Rng& rng, double p);

template <typename T>
void shuffle(Rng& rng, std::span<T> items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

/// Identity permutation of [0, n) shuffled with `rng`.
std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n);

/// `k` distinct indices from [0, n), in the order drawn.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                    std::size_t k);

}  // namespace advmal
