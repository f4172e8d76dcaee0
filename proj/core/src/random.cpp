#include "tlsmap/random.hpp"

#include <numeric>

namespace tlsmap {

std::vector<std::uint32_t> seeded_sample(std::size_t n, std::size_t count,
                                         std::uint64_t seed) {
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  count = std::min(count, n);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace tlsmap
