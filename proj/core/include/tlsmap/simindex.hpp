#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tlsmap/features.hpp"

namespace tlsmap {

// Exact Jaccard similarity of two sorted, duplicate-free index sets.
// J(empty, empty) = 1.
double jaccard(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

// GCC/Clang 128-bit integer, used for the Mersenne-prime reduction.
__extension__ using Uint128 = unsigned __int128;

// h_i(x) = ((a_i * x + b_i) mod (2^61 - 1)) mod 2^32 with (a_i, b_i) drawn
// from master_seed.
class MinHashConfig {
 public:
  static constexpr std::size_t kDefaultHashes = 1024;
  static constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

  explicit MinHashConfig(std::size_t num_hashes = kDefaultHashes,
                         std::uint64_t master_seed = 0);

  std::size_t num_hashes() const { return params_.size(); }
  std::uint64_t master_seed() const { return master_seed_; }

  std::uint32_t hash(std::size_t i, std::uint32_t x) const {
    const auto& [a, b] = params_[i];
    Uint128 v = static_cast<Uint128>(a) * x + b;
    // Fold twice: v < 2^94 after the first multiply-add.
    std::uint64_t r = static_cast<std::uint64_t>(v & kMersenne61) +
                      static_cast<std::uint64_t>(v >> 61);
    r = (r & kMersenne61) + (r >> 61);
    if (r >= kMersenne61) r -= kMersenne61;
    return static_cast<std::uint32_t>(r);
  }

  const std::vector<std::pair<std::uint64_t, std::uint64_t>>& params() const {
    return params_;
  }

 private:
  std::uint64_t master_seed_;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> params_;
};

struct MinHashSignature {
  static constexpr std::uint32_t kSentinel = UINT32_MAX;

  std::vector<std::uint32_t> values;
  bool empty = false;  // built from an empty feature vector

  friend bool operator==(const MinHashSignature&, const MinHashSignature&) = default;
};

MinHashSignature minhash(const FeatureVector& vec, const MinHashConfig& cfg);
MinHashSignature minhash(std::span<const std::uint32_t> set_bits,
                         const MinHashConfig& cfg);

// 1 - (agreeing components / d). Empty signatures are at distance 1.0 from
// everything. Throws Error(kLengthMismatch) on differing d.
double estimate_distance(const MinHashSignature& a, const MinHashSignature& b);

struct Neighbor {
  std::uint32_t id = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct ForestConfig {
  std::size_t num_trees = 128;
  // Candidate widening stops once this many times k candidates are found.
  std::size_t candidate_factor = 10;
};

// Prefix-tree forest over MinHash signatures. Tree t keys on components
// [t*depth, (t+1)*depth) with depth = d / num_trees. Signatures are added,
// then index() freezes the structure; queries before that throw.
class LshForest {
 public:
  explicit LshForest(ForestConfig config = {});

  void add(MinHashSignature signature);
  void index();
  bool built() const { return built_; }

  // k nearest indexed ids to `id`, excluding `id` itself; ascending
  // distance, ties by ascending id. Throws kUnknownId / kIndexNotBuilt.
  std::vector<Neighbor> query(std::uint32_t id, std::size_t k) const;
  std::vector<Neighbor> query_signature(
      const MinHashSignature& signature, std::size_t k,
      std::optional<std::uint32_t> exclude = std::nullopt) const;

  // Forest candidates for `signature`: descends every tree to the longest
  // shared prefix and shortens the prefix until `wanted` ids are gathered.
  // Falls back to every indexed id when even a zero-length prefix is needed.
  std::vector<std::uint32_t> candidates(
      const MinHashSignature& signature, std::size_t wanted,
      std::optional<std::uint32_t> exclude = std::nullopt) const;

  std::size_t size() const { return signatures_.size(); }
  std::size_t num_hashes() const { return num_hashes_; }
  std::size_t depth() const { return depth_; }
  const ForestConfig& config() const { return config_; }
  const MinHashSignature& signature(std::uint32_t id) const;
  const std::vector<MinHashSignature>& signatures() const { return signatures_; }

 private:
  void require_built() const;

  ForestConfig config_;
  std::size_t num_hashes_ = 0;
  std::size_t depth_ = 0;
  bool built_ = false;
  std::vector<MinHashSignature> signatures_;
  std::vector<std::vector<std::uint32_t>> trees_;  // ids sorted by tree key
};

// Adds every signature and indexes. Throws Error(kEmptyIndex) when empty.
LshForest build_forest(std::vector<MinHashSignature> signatures,
                       const ForestConfig& config = {});

// JSON lines {id, values, empty}.
void write_signatures(const std::filesystem::path& path,
                      std::span<const MinHashSignature> signatures);
std::vector<MinHashSignature> read_signatures(const std::filesystem::path& path);

}  // namespace tlsmap
