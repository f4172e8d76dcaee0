#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace tlsmap {

// std::shuffle's algorithm is implementation-defined; this Fisher-Yates
// pass gives the same permutation on every standard library for a seed.
template <typename T>
void seeded_shuffle(std::span<T> items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

// Seeded sample of `count` distinct indices from [0, n), in draw order.
std::vector<std::uint32_t> seeded_sample(std::size_t n, std::size_t count,
                                         std::uint64_t seed);

}  // namespace tlsmap
