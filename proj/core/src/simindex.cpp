#include "tlsmap/simindex.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "tlsmap/error.hpp"

namespace tlsmap {

double jaccard(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t i = 0, j = 0, common = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++common;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t total = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(total);
}

MinHashConfig::MinHashConfig(std::size_t num_hashes, std::uint64_t master_seed)
    : master_seed_(master_seed) {
  if (num_hashes == 0) {
    throw Error(ErrorCode::kConfig, "MinHash needs at least one hash function");
  }
  std::mt19937_64 rng(master_seed);
  params_.reserve(num_hashes);
  for (std::size_t i = 0; i < num_hashes; ++i) {
    // a in [1, p-2] forced odd, b in [0, p-2] forced odd.
    const std::uint64_t a = ((rng() % (kMersenne61 - 2)) + 1) | 1u;
    const std::uint64_t b = (rng() % (kMersenne61 - 2)) | 1u;
    params_.emplace_back(a, b);
  }
}

MinHashSignature minhash(std::span<const std::uint32_t> set_bits,
                         const MinHashConfig& cfg) {
  MinHashSignature sig;
  sig.values.assign(cfg.num_hashes(), MinHashSignature::kSentinel);
  sig.empty = set_bits.empty();
  for (std::size_t i = 0; i < cfg.num_hashes(); ++i) {
    std::uint32_t best = MinHashSignature::kSentinel;
    for (auto x : set_bits) best = std::min(best, cfg.hash(i, x));
    sig.values[i] = best;
  }
  return sig;
}

MinHashSignature minhash(const FeatureVector& vec, const MinHashConfig& cfg) {
  return minhash(std::span<const std::uint32_t>(vec.set_bits), cfg);
}

double estimate_distance(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.values.size() != b.values.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "signature lengths differ: " + std::to_string(a.values.size()) +
                    " vs " + std::to_string(b.values.size()));
  }
  if (a.empty || b.empty || a.values.empty()) return 1.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    agree += a.values[i] == b.values[i];
  }
  return 1.0 - static_cast<double>(agree) / static_cast<double>(a.values.size());
}

LshForest::LshForest(ForestConfig config) : config_(config) {
  if (config_.num_trees == 0) {
    throw Error(ErrorCode::kConfig, "LSH forest needs at least one tree");
  }
  if (config_.candidate_factor == 0) config_.candidate_factor = 1;
}

void LshForest::add(MinHashSignature signature) {
  if (built_) {
    throw Error(ErrorCode::kConfig, "LSH forest is immutable after index()");
  }
  if (signatures_.empty()) {
    num_hashes_ = signature.values.size();
    if (config_.num_trees > num_hashes_) {
      throw Error(ErrorCode::kConfig, "more prefix trees than hash functions");
    }
  } else if (signature.values.size() != num_hashes_) {
    throw Error(ErrorCode::kLengthMismatch, "signature length differs from the index");
  }
  signatures_.push_back(std::move(signature));
}

namespace {

// Lexicographic compare of the first `len` components starting at `offset`.
int compare_prefix(const std::vector<std::uint32_t>& a,
                   const std::vector<std::uint32_t>& b, std::size_t offset,
                   std::size_t len) {
  for (std::size_t i = offset; i < offset + len; ++i) {
    if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  }
  return 0;
}

}  // namespace

void LshForest::index() {
  if (signatures_.empty()) throw Error(ErrorCode::kEmptyIndex, "no signatures to index");
  depth_ = num_hashes_ / config_.num_trees;
  trees_.assign(config_.num_trees, {});
  for (std::size_t t = 0; t < config_.num_trees; ++t) {
    auto& order = trees_[t];
    order.resize(signatures_.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t offset = t * depth_;
    std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
      const int c = compare_prefix(signatures_[x].values, signatures_[y].values,
                                   offset, depth_);
      return c != 0 ? c < 0 : x < y;
    });
  }
  built_ = true;
}

void LshForest::require_built() const {
  if (!built_) throw Error(ErrorCode::kIndexNotBuilt, "LSH forest has not been indexed");
}

const MinHashSignature& LshForest::signature(std::uint32_t id) const {
  if (id >= signatures_.size()) {
    throw Error(ErrorCode::kUnknownId, "id " + std::to_string(id) + " is not indexed");
  }
  return signatures_[id];
}

std::vector<std::uint32_t> LshForest::candidates(
    const MinHashSignature& signature, std::size_t wanted,
    std::optional<std::uint32_t> exclude) const {
  require_built();
  if (signature.values.size() != num_hashes_) {
    throw Error(ErrorCode::kLengthMismatch, "query signature length differs from the index");
  }
  const std::size_t available = signatures_.size() - (exclude ? 1 : 0);
  wanted = std::min(wanted, available);

  std::vector<char> seen(signatures_.size(), 0);
  std::vector<std::uint32_t> found;
  const auto take = [&](std::uint32_t id) {
    if (seen[id] || (exclude && id == *exclude)) return;
    seen[id] = 1;
    found.push_back(id);
  };

  for (std::size_t r = depth_; r > 0 && found.size() < wanted; --r) {
    for (std::size_t t = 0; t < trees_.size(); ++t) {
      const std::size_t offset = t * depth_;
      const auto& order = trees_[t];
      // Partition point helpers compare stored keys against the query prefix.
      const auto lo = std::partition_point(order.begin(), order.end(), [&](std::uint32_t id) {
        return compare_prefix(signatures_[id].values, signature.values, offset, r) < 0;
      });
      const auto hi = std::partition_point(lo, order.end(), [&](std::uint32_t id) {
        return compare_prefix(signatures_[id].values, signature.values, offset, r) == 0;
      });
      for (auto it = lo; it != hi; ++it) take(*it);
    }
  }
  if (found.size() < wanted) {
    for (std::uint32_t id = 0; id < signatures_.size(); ++id) take(id);
  }
  return found;
}

std::vector<Neighbor> LshForest::query_signature(
    const MinHashSignature& signature, std::size_t k,
    std::optional<std::uint32_t> exclude) const {
  require_built();
  if (k == 0) return {};
  const auto cands = candidates(signature, k * config_.candidate_factor, exclude);
  std::vector<Neighbor> ranked;
  ranked.reserve(cands.size());
  for (auto id : cands) {
    ranked.push_back({id, estimate_distance(signature, signatures_[id])});
  }
  const auto by_rank = [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  };
  if (ranked.size() > k) {
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k),
                      ranked.end(), by_rank);
    ranked.resize(k);
  } else {
    std::sort(ranked.begin(), ranked.end(), by_rank);
  }
  return ranked;
}

std::vector<Neighbor> LshForest::query(std::uint32_t id, std::size_t k) const {
  require_built();
  return query_signature(signature(id), k, id);
}

LshForest build_forest(std::vector<MinHashSignature> signatures,
                       const ForestConfig& config) {
  if (signatures.empty()) throw Error(ErrorCode::kEmptyIndex, "no signatures to index");
  LshForest forest(config);
  for (auto& s : signatures) forest.add(std::move(s));
  forest.index();
  return forest;
}

void write_signatures(const std::filesystem::path& path,
                      std::span<const MinHashSignature> signatures) {
  std::string out;
  for (std::size_t i = 0; i < signatures.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = i;
    j["values"] = signatures[i].values;
    j["empty"] = signatures[i].empty;
    out += j.dump();
    out.push_back('\n');
  }
  detail::write_file(path, out);
}

std::vector<MinHashSignature> read_signatures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<MinHashSignature> sigs;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("id").get<std::size_t>() != sigs.size()) {
        throw Error(ErrorCode::kFormat, path.string() + ": ids must be dense and ordered");
      }
      MinHashSignature s;
      s.values = j.at("values").get<std::vector<std::uint32_t>>();
      s.empty = j.value("empty", false);
      sigs.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
    }
  }
  return sigs;
}

}  // namespace tlsmap
