#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace tlsmap {

// Lowercase hex SHA-256 of the exact input bytes.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file_hex(const std::filesystem::path& path);

// Insertion-ordered set of tokens.
class OrderedSet {
 public:
  bool insert(std::string_view token);
  bool contains(std::string_view token) const;
  const std::vector<std::string>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  friend bool operator==(const OrderedSet& a, const OrderedSet& b) {
    return a.items_ == b.items_;
  }

 private:
  std::vector<std::string> items_;
  std::unordered_set<std::string> seen_;
};

// One "|"-delimited response of the raw scan string. Fields inside a segment
// are "_"-delimited: version, cipher, then extension groups. A final field
// starting with '<' is an alert code and is held separately.
struct HelloSegment {
  std::string version;
  std::string cipher;
  std::vector<std::string> extension_groups;
  std::optional<std::string> alert;  // text after '<', e.g. "40"
  // Number of "_" fields before the alert; keeps short segments lossless.
  std::size_t field_count = 0;

  bool is_alert() const { return alert.has_value(); }
  bool is_handshake() const { return !version.empty(); }
  std::string serialize() const;

  friend bool operator==(const HelloSegment&, const HelloSegment&) = default;
};

// Extension groups are assigned to categories by position: group 0 holds the
// server-hello extensions, group 1 the encrypted extensions and group 2 the
// certificate extensions. Any later groups fold into `extensions`.
struct FeatureSets {
  OrderedSet versions;
  OrderedSet ciphers;
  OrderedSet extensions;
  OrderedSet encrypted_extensions;
  OrderedSet certificate_extensions;
  OrderedSet alerts;

  friend bool operator==(const FeatureSets&, const FeatureSets&) = default;
};

struct TlsFingerprint {
  std::string raw;
  std::vector<HelloSegment> segments;
  FeatureSets dedup;
  std::string sha256_id;

  // Re-joins segments with "|"; equals `raw` for every parsed input.
  std::string serialize() const;
};

// Throws Error(kEmptyFingerprint) for empty text and MalformedSegmentError
// for a segment with neither a version nor an alert, or non-printable bytes.
TlsFingerprint parse_raw(std::string_view text);

FeatureSets dedup_features(std::span<const HelloSegment> segments);

// Scan output rows: CSV with a header line, or JSON lines.
struct ScanColumns {
  std::string domain = "domain";
  std::string fingerprint = "raw_fingerprint";
};

struct ScanRow {
  std::string domain;
  std::string raw_fingerprint;
};

std::vector<ScanRow> load_scan_output(const std::filesystem::path& path,
                                      const ScanColumns& columns = {});

}  // namespace tlsmap
