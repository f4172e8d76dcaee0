#include "tlsmap/tls_fingerprint.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "tlsmap/error.hpp"

namespace tlsmap {

namespace {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

MdCtx new_sha256_ctx() {
  MdCtx ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("EVP sha256 init failed");
  }
  return ctx;
}

std::string finish_hex(EVP_MD_CTX* ctx) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, digest.data(), &len) != 1) {
    throw std::runtime_error("EVP sha256 final failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  auto ctx = new_sha256_ctx();
  EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size());
  return finish_hex(ctx.get());
}

std::string sha256_file_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  auto ctx = new_sha256_ctx();
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return finish_hex(ctx.get());
}

bool OrderedSet::insert(std::string_view token) {
  auto [it, inserted] = seen_.emplace(token);
  if (inserted) items_.emplace_back(token);
  return inserted;
}

bool OrderedSet::contains(std::string_view token) const {
  return seen_.count(std::string(token)) != 0;
}

std::string HelloSegment::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < field_count; ++i) {
    if (i > 0) out.push_back('_');
    if (i == 0) {
      out += version;
    } else if (i == 1) {
      out += cipher;
    } else {
      out += extension_groups[i - 2];
    }
  }
  if (alert) {
    if (field_count > 0) out.push_back('_');
    out.push_back('<');
    out += *alert;
  }
  return out;
}

std::string TlsFingerprint::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) out.push_back('|');
    out += segments[i].serialize();
  }
  return out;
}

namespace {

HelloSegment parse_segment(std::string_view text, std::size_t index) {
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x20 || u > 0x7e) {
      throw MalformedSegmentError(
          index, "segment " + std::to_string(index) +
                     " contains a non-printable byte");
    }
  }
  auto fields = detail::split(text, '_');
  HelloSegment seg;
  if (!fields.back().empty() && fields.back().front() == '<') {
    seg.alert = std::string(fields.back().substr(1));
    fields.pop_back();
  }
  seg.field_count = fields.size();
  if (!fields.empty()) seg.version = std::string(fields[0]);
  if (fields.size() > 1) seg.cipher = std::string(fields[1]);
  for (std::size_t i = 2; i < fields.size(); ++i) {
    seg.extension_groups.emplace_back(fields[i]);
  }
  if (!seg.is_handshake() && !seg.is_alert()) {
    throw MalformedSegmentError(
        index, "segment " + std::to_string(index) +
                   " has neither a version nor an alert code");
  }
  return seg;
}

}  // namespace

FeatureSets dedup_features(std::span<const HelloSegment> segments) {
  FeatureSets sets;
  const auto add = [](OrderedSet& set, const std::string& token) {
    if (!token.empty()) set.insert(token);
  };
  for (const auto& seg : segments) {
    add(sets.versions, seg.version);
    add(sets.ciphers, seg.cipher);
    for (std::size_t g = 0; g < seg.extension_groups.size(); ++g) {
      const auto& token = seg.extension_groups[g];
      switch (g) {
        case 1:
          add(sets.encrypted_extensions, token);
          break;
        case 2:
          add(sets.certificate_extensions, token);
          break;
        default:
          add(sets.extensions, token);
          break;
      }
    }
    if (seg.alert) add(sets.alerts, *seg.alert);
  }
  return sets;
}

TlsFingerprint parse_raw(std::string_view text) {
  if (text.empty()) {
    throw Error(ErrorCode::kEmptyFingerprint, "empty fingerprint");
  }
  TlsFingerprint fp;
  fp.raw = std::string(text);
  const auto parts = detail::split(text, '|');
  fp.segments.reserve(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    fp.segments.push_back(parse_segment(parts[i], i));
  }
  fp.dedup = dedup_features(fp.segments);
  fp.sha256_id = sha256_hex(text);
  return fp;
}

std::vector<ScanRow> load_scan_output(const std::filesystem::path& path,
                                      const ScanColumns& columns) {
  const std::string content = detail::read_file(path);
  std::vector<ScanRow> rows;
  const auto lines = detail::split(content, '\n');
  const auto first = detail::trim(content);
  const bool json_lines = !first.empty() && first.front() == '{';

  if (json_lines) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto line = detail::trim(lines[i]);
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        rows.push_back({j.at(columns.domain).get<std::string>(),
                        j.at(columns.fingerprint).get<std::string>()});
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kFormat, path.string() + ":" +
                                            std::to_string(i + 1) + ": " +
                                            e.what());
      }
    }
    return rows;
  }

  std::optional<std::size_t> domain_col;
  std::optional<std::size_t> fp_col;
  std::size_t header_width = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = detail::trim(detail::chomp(lines[i]));
    if (line.empty()) continue;
    auto cells = detail::split(line, ',');
    for (auto& c : cells) {
      c = detail::trim(c);
      if (c.size() >= 2 && c.front() == '"' && c.back() == '"') {
        c = c.substr(1, c.size() - 2);
      }
    }
    if (!domain_col) {
      header_width = cells.size();
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c] == columns.domain) domain_col = c;
        if (cells[c] == columns.fingerprint) fp_col = c;
      }
      if (!domain_col || !fp_col) {
        throw Error(ErrorCode::kFormat,
                    path.string() + ": header lacks columns '" +
                        columns.domain + "' and '" + columns.fingerprint + "'");
      }
      continue;
    }
    if (cells.size() != header_width) {
      throw Error(ErrorCode::kFormat, path.string() + ":" +
                                          std::to_string(i + 1) +
                                          ": column count mismatch");
    }
    rows.push_back({std::string(cells[*domain_col]),
                    std::string(cells[*fp_col])});
  }
  return rows;
}

}  // namespace tlsmap
