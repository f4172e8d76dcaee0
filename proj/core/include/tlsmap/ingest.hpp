#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tlsmap {

// Integer encoding is fixed: good = 0, bad = 1, unknown = 3.
enum class Label : std::uint8_t { kGood = 0, kBad = 1, kUnknown = 3 };

// Accepts "good" / "bad" / "unknown" in any case, or "0" / "1" / "3".
// Throws Error(kUnknownLabel) otherwise.
Label parse_label(std::string_view text);
Label label_from_int(int value);
constexpr int to_int(Label label) { return static_cast<int>(label); }
std::string_view to_string(Label label);

struct Ipv4 {
  std::uint32_t value = 0;

  friend bool operator==(Ipv4, Ipv4) = default;
};

// Dotted-quad only. IPv6 and anything else yields nullopt.
std::optional<Ipv4> parse_ipv4(std::string_view text);
std::string to_string(Ipv4 ip);

// Lowercases ASCII and punycode-encodes non-ASCII labels ("xn--").
// Throws Error(kFormat) for empty names or names containing whitespace.
std::string normalize_domain(std::string_view name);

struct DomainRecord {
  std::string domain;
  std::optional<Ipv4> ip;
  std::string source;
  Label label = Label::kUnknown;
  std::optional<std::uint32_t> asn;

  bool resolved() const { return ip.has_value(); }

  friend bool operator==(const DomainRecord&, const DomainRecord&) = default;
};

// IPv4 prefix table answering longest-prefix-match queries. Immutable after
// construction, so concurrent lookups are safe.
class AsnDatabase {
 public:
  struct Entry {
    std::uint32_t network = 0;  // host bits are cleared on insert
    std::uint8_t length = 0;    // 0..32
    std::uint32_t asn = 0;
  };

  AsnDatabase() = default;
  // Duplicate prefixes keep the first entry seen.
  static AsnDatabase from_entries(const std::vector<Entry>& entries);

  std::optional<std::uint32_t> lookup(Ipv4 ip) const;
  // Returns nullopt for anything that is not an IPv4 address.
  std::optional<std::uint32_t> lookup(std::string_view ip_text) const;

  std::size_t size() const { return size_; }
  std::size_t skipped_lines() const { return skipped_lines_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  friend AsnDatabase load_asn_db(const std::filesystem::path& path);

  bool insert(Entry entry);

  // One exact-match table per prefix length; lookups probe the populated
  // lengths from longest to shortest.
  std::array<std::unordered_map<std::uint32_t, std::uint32_t>, 33> by_length_;
  std::vector<std::uint8_t> lengths_desc_;
  std::vector<Entry> entries_;
  std::size_t size_ = 0;
  std::size_t skipped_lines_ = 0;
};

// Reads "<prefix>\t<asn>" lines; ';' and '#' start comments. Malformed lines
// are skipped and counted. Throws kIo, or kFormat when nothing parsed.
AsnDatabase load_asn_db(const std::filesystem::path& path);

struct DomainLoadResult {
  std::vector<DomainRecord> records;
  std::size_t unresolved = 0;
};

// CSV "domain[,ip]". An ip cell may list several addresses separated by ';'
// or spaces, in which case the first one is kept. Output order is a seeded
// shuffle of the input rows.
DomainLoadResult load_domains(const std::filesystem::path& path,
                              const std::string& source, Label label,
                              std::uint64_t seed);
DomainLoadResult parse_domains(std::istream& in, const std::string& source,
                               Label label, std::uint64_t seed);

void enrich_asn(std::vector<DomainRecord>& records, const AsnDatabase& db);

// JSON-lines record store: {domain, ip, source, label, asn}.
void write_records(const std::filesystem::path& path,
                   const std::vector<DomainRecord>& records);
std::vector<DomainRecord> read_records(const std::filesystem::path& path);

}  // namespace tlsmap
