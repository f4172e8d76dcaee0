#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tlsmap/http_headers.hpp"
#include "tlsmap/tls_fingerprint.hpp"

namespace tlsmap {

// kHashOnly adds "hdrhash:<decimal>" and "server:<value>"; kPerKey adds
// "hdrkey:<key>" per distinct header key plus "server:<value>".
enum class HeaderMode { kNone, kHashOnly, kPerKey };

HeaderMode parse_header_mode(std::string_view text);
std::string_view to_string(HeaderMode mode);

// What vectorization needs to know about one scanned server.
struct FeatureRecord {
  FeatureSets tls;
  std::optional<HeaderFingerprint> header;
  std::optional<std::string> server_value;
  std::vector<std::string> header_keys;
};

// Namespaced tokens for a record, in first-seen order without duplicates.
std::vector<std::string> record_tokens(const FeatureRecord& record,
                                       HeaderMode mode);

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(HeaderMode mode) : mode_(mode) {}

  // Throws Error(kFormat) on duplicates.
  static Vocabulary from_tokens(std::vector<std::string> tokens,
                                HeaderMode mode);

  // Returns the column of `token`, appending it if new.
  std::uint32_t add(std::string_view token);
  std::optional<std::uint32_t> index_of(std::string_view token) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  HeaderMode mode() const { return mode_; }

 private:
  HeaderMode mode_ = HeaderMode::kHashOnly;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Tokens in first-seen order over the record stream. Throws kEmptyDataset.
Vocabulary build_vocabulary(std::span<const FeatureRecord> records,
                            HeaderMode mode);

struct FeatureVector {
  std::size_t columns = 0;
  std::vector<std::uint32_t> set_bits;  // sorted, unique

  bool empty() const { return set_bits.empty(); }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Binary presence encoding. Throws Error(kUnknownToken) when the record has a
// token the vocabulary lacks.
FeatureVector vectorize(const FeatureRecord& record, const Vocabulary& vocab);

// Vocabulary file: JSON array of tokens in column order.
void write_vocabulary(const std::filesystem::path& path,
                      const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::filesystem::path& path, HeaderMode mode);

// Vector file: JSON lines {id, set_bits}.
void write_vectors(const std::filesystem::path& path,
                   std::span<const FeatureVector> vectors);
std::vector<FeatureVector> read_vectors(const std::filesystem::path& path,
                                        std::size_t columns);

}  // namespace tlsmap
