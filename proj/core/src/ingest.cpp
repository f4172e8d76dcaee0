#include "tlsmap/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "tlsmap/error.hpp"
#include "tlsmap/random.hpp"

namespace tlsmap {

using detail::chomp;
using detail::trim;

Label parse_label(std::string_view text) {
  const std::string lowered = detail::to_lower(trim(text));
  if (lowered == "good" || lowered == "0") return Label::kGood;
  if (lowered == "bad" || lowered == "1") return Label::kBad;
  if (lowered == "unknown" || lowered == "3") return Label::kUnknown;
  throw Error(ErrorCode::kUnknownLabel,
              "unknown label '" + std::string(text) + "'");
}

Label label_from_int(int value) {
  switch (value) {
    case 0:
      return Label::kGood;
    case 1:
      return Label::kBad;
    case 3:
      return Label::kUnknown;
    default:
      throw Error(ErrorCode::kUnknownLabel,
                  "label code " + std::to_string(value) + " is not 0, 1 or 3");
  }
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::kGood:
      return "good";
    case Label::kBad:
      return "bad";
    case Label::kUnknown:
      return "unknown";
  }
  return "unknown";
}

std::optional<Ipv4> parse_ipv4(std::string_view text) {
  text = trim(text);
  const auto parts = detail::split(text, '.');
  if (parts.size() != 4) return std::nullopt;
  std::uint32_t value = 0;
  for (auto part : parts) {
    if (part.empty() || part.size() > 3) return std::nullopt;
    if (!std::all_of(part.begin(), part.end(),
                     [](char c) { return c >= '0' && c <= '9'; })) {
      return std::nullopt;
    }
    const auto octet = detail::parse_int<unsigned>(part);
    if (!octet || *octet > 255) return std::nullopt;
    value = (value << 8) | *octet;
  }
  return Ipv4{value};
}

std::string to_string(Ipv4 ip) {
  return std::to_string(ip.value >> 24) + "." +
         std::to_string((ip.value >> 16) & 0xff) + "." +
         std::to_string((ip.value >> 8) & 0xff) + "." +
         std::to_string(ip.value & 0xff);
}

namespace {

// RFC 3492 parameters.
constexpr std::uint32_t kBase = 36;
constexpr std::uint32_t kTmin = 1;
constexpr std::uint32_t kTmax = 26;
constexpr std::uint32_t kSkew = 38;
constexpr std::uint32_t kDamp = 700;
constexpr std::uint32_t kInitialBias = 72;
constexpr std::uint32_t kInitialN = 128;

std::uint32_t adapt(std::uint32_t delta, std::uint32_t points, bool first) {
  delta = first ? delta / kDamp : delta / 2;
  delta += delta / points;
  std::uint32_t k = 0;
  while (delta > ((kBase - kTmin) * kTmax) / 2) {
    delta /= kBase - kTmin;
    k += kBase;
  }
  return k + (kBase - kTmin + 1) * delta / (delta + kSkew);
}

char encode_digit(std::uint32_t d) {
  return static_cast<char>(d < 26 ? 'a' + d : '0' + (d - 26));
}

std::vector<std::uint32_t> decode_utf8(std::string_view text) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::uint32_t cp = 0;
    std::size_t len = 0;
    if (c < 0x80) {
      cp = c;
      len = 1;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1f;
      len = 2;
    } else if ((c >> 4) == 0xe) {
      cp = c & 0x0f;
      len = 3;
    } else if ((c >> 3) == 0x1e) {
      cp = c & 0x07;
      len = 4;
    } else {
      throw Error(ErrorCode::kFormat, "invalid UTF-8 in domain name");
    }
    if (i + len > text.size()) {
      throw Error(ErrorCode::kFormat, "truncated UTF-8 in domain name");
    }
    for (std::size_t j = 1; j < len; ++j) {
      const auto cc = static_cast<unsigned char>(text[i + j]);
      if ((cc >> 6) != 0x2) {
        throw Error(ErrorCode::kFormat, "invalid UTF-8 in domain name");
      }
      cp = (cp << 6) | (cc & 0x3f);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string punycode_label(std::string_view label) {
  const auto input = decode_utf8(label);
  std::string output;
  for (auto cp : input) {
    if (cp < 0x80) output.push_back(static_cast<char>(cp));
  }
  const auto basic = static_cast<std::uint32_t>(output.size());
  std::uint32_t handled = basic;
  if (basic > 0) output.push_back('-');

  std::uint32_t n = kInitialN;
  std::uint32_t delta = 0;
  std::uint32_t bias = kInitialBias;
  while (handled < input.size()) {
    std::uint32_t m = UINT32_MAX;
    for (auto cp : input) {
      if (cp >= n && cp < m) m = cp;
    }
    delta += (m - n) * (handled + 1);
    n = m;
    for (auto cp : input) {
      if (cp < n) ++delta;
      if (cp != n) continue;
      std::uint32_t q = delta;
      for (std::uint32_t k = kBase;; k += kBase) {
        const std::uint32_t t =
            k <= bias ? kTmin : (k >= bias + kTmax ? kTmax : k - bias);
        if (q < t) break;
        output.push_back(encode_digit(t + (q - t) % (kBase - t)));
        q = (q - t) / (kBase - t);
      }
      output.push_back(encode_digit(q));
      bias = adapt(delta, handled + 1, handled == basic);
      delta = 0;
      ++handled;
    }
    ++delta;
    ++n;
  }
  return "xn--" + output;
}

}  // namespace

std::string normalize_domain(std::string_view name) {
  name = trim(name);
  while (!name.empty() && name.back() == '.') name.remove_suffix(1);
  if (name.empty()) throw Error(ErrorCode::kFormat, "empty domain name");
  for (char c : name) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
        c == '\f') {
      throw Error(ErrorCode::kFormat,
                  "domain contains whitespace: '" + std::string(name) + "'");
    }
  }
  const std::string lowered = detail::to_lower(name);
  std::string out;
  for (auto label : detail::split(lowered, '.')) {
    if (!out.empty()) out.push_back('.');
    const bool ascii = std::all_of(label.begin(), label.end(), [](char c) {
      return static_cast<unsigned char>(c) < 0x80;
    });
    if (ascii) {
      out.append(label);
    } else {
      out += punycode_label(label);
    }
  }
  return out;
}

bool AsnDatabase::insert(Entry entry) {
  const std::uint32_t mask =
      entry.length == 0 ? 0u : ~0u << (32 - entry.length);
  entry.network &= mask;
  auto& table = by_length_[entry.length];
  if (!table.emplace(entry.network, entry.asn).second) return false;
  if (std::find(lengths_desc_.begin(), lengths_desc_.end(), entry.length) ==
      lengths_desc_.end()) {
    lengths_desc_.push_back(entry.length);
    std::sort(lengths_desc_.rbegin(), lengths_desc_.rend());
  }
  entries_.push_back(entry);
  ++size_;
  return true;
}

AsnDatabase AsnDatabase::from_entries(const std::vector<Entry>& entries) {
  AsnDatabase db;
  for (const auto& e : entries) {
    if (e.length > 32) {
      throw Error(ErrorCode::kFormat,
                  "prefix length " + std::to_string(e.length) + " > 32");
    }
    db.insert(e);
  }
  return db;
}

std::optional<std::uint32_t> AsnDatabase::lookup(Ipv4 ip) const {
  for (auto length : lengths_desc_) {
    const std::uint32_t mask = length == 0 ? 0u : ~0u << (32 - length);
    const auto& table = by_length_[length];
    if (auto it = table.find(ip.value & mask); it != table.end()) {
      return it->second;
    }
  }
  return std::nullopt;
}

std::optional<std::uint32_t> AsnDatabase::lookup(
    std::string_view ip_text) const {
  const auto ip = parse_ipv4(ip_text);
  if (!ip) return std::nullopt;
  return lookup(*ip);
}

AsnDatabase load_asn_db(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  AsnDatabase db;
  std::string raw;
  while (std::getline(in, raw)) {
    const auto line = trim(chomp(raw));
    if (line.empty() || line.front() == ';' || line.front() == '#') continue;
    const auto fields = detail::split(line, '\t');
    bool ok = false;
    if (fields.size() == 2) {
      const auto slash = fields[0].find('/');
      if (slash != std::string_view::npos) {
        const auto ip = parse_ipv4(fields[0].substr(0, slash));
        const auto length =
            detail::parse_int<unsigned>(fields[0].substr(slash + 1));
        const auto asn = detail::parse_int<std::uint32_t>(fields[1]);
        if (ip && length && *length <= 32 && asn) {
          db.insert({ip->value, static_cast<std::uint8_t>(*length), *asn});
          ok = true;
        }
      }
    }
    if (!ok) ++db.skipped_lines_;
  }
  if (in.bad()) throw Error(ErrorCode::kIo, "read error on " + path.string());
  if (db.size() == 0) {
    throw Error(ErrorCode::kFormat,
                "no valid prefix entries in " + path.string());
  }
  return db;
}

namespace {

std::string_view unquote(std::string_view cell) {
  cell = trim(cell);
  if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') {
    cell = cell.substr(1, cell.size() - 2);
  }
  return cell;
}

}  // namespace

DomainLoadResult parse_domains(std::istream& in, const std::string& source,
                               Label label, std::uint64_t seed) {
  DomainLoadResult result;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(chomp(raw));
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() > 2) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) +
                                          ": expected domain[,ip]");
    }
    const auto domain_cell = unquote(cells[0]);
    if (line_no == 1 && detail::iequals(domain_cell, "domain")) continue;

    DomainRecord record;
    try {
      record.domain = normalize_domain(domain_cell);
    } catch (const Error& e) {
      throw Error(ErrorCode::kFormat,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    record.source = source;
    record.label = label;
    if (cells.size() == 2) {
      auto ip_cell = unquote(cells[1]);
      const auto cut = ip_cell.find_first_of("; ");
      if (cut != std::string_view::npos) ip_cell = ip_cell.substr(0, cut);
      if (!ip_cell.empty()) {
        record.ip = parse_ipv4(ip_cell);
        if (!record.ip) {
          throw Error(ErrorCode::kFormat,
                      "line " + std::to_string(line_no) +
                          ": not an IPv4 address '" + std::string(ip_cell) +
                          "'");
        }
      }
    }
    if (!record.resolved()) ++result.unresolved;
    result.records.push_back(std::move(record));
  }
  seeded_shuffle(std::span<DomainRecord>(result.records), seed);
  return result;
}

DomainLoadResult load_domains(const std::filesystem::path& path,
                              const std::string& source, Label label,
                              std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return parse_domains(in, source, label, seed);
}

void enrich_asn(std::vector<DomainRecord>& records, const AsnDatabase& db) {
  for (auto& r : records) {
    r.asn = r.ip ? db.lookup(*r.ip) : std::nullopt;
  }
}

void write_records(const std::filesystem::path& path,
                   const std::vector<DomainRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["domain"] = r.domain;
    j["ip"] = r.ip ? nlohmann::ordered_json(to_string(*r.ip)) : nlohmann::ordered_json(nullptr);
    j["source"] = r.source;
    j["label"] = to_int(r.label);
    j["asn"] = r.asn ? nlohmann::ordered_json(*r.asn) : nlohmann::ordered_json(nullptr);
    out += j.dump();
    out.push_back('\n');
  }
  detail::write_file(path, out);
}

std::vector<DomainRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<DomainRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      DomainRecord r;
      r.domain = j.at("domain").get<std::string>();
      if (!j.at("ip").is_null()) {
        r.ip = parse_ipv4(j.at("ip").get<std::string>());
        if (!r.ip) throw Error(ErrorCode::kFormat, "bad ip");
      }
      r.source = j.at("source").get<std::string>();
      r.label = label_from_int(j.at("label").get<int>());
      if (j.contains("asn") && !j.at("asn").is_null()) {
        r.asn = j.at("asn").get<std::uint32_t>();
      }
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormat, path.string() + ":" +
                                          std::to_string(line_no) + ": " +
                                          e.what());
    }
  }
  return records;
}

}  // namespace tlsmap
