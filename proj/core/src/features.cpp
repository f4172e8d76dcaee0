#include "tlsmap/features.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "tlsmap/error.hpp"

namespace tlsmap {

HeaderMode parse_header_mode(std::string_view text) {
  const auto lowered = detail::to_lower(detail::trim(text));
  if (lowered == "none") return HeaderMode::kNone;
  if (lowered == "hash_only" || lowered == "hashonly") return HeaderMode::kHashOnly;
  if (lowered == "per_key" || lowered == "perkey") return HeaderMode::kPerKey;
  throw Error(ErrorCode::kConfig, "unknown header mode '" + std::string(text) + "'");
}

std::string_view to_string(HeaderMode mode) {
  switch (mode) {
    case HeaderMode::kNone:
      return "none";
    case HeaderMode::kHashOnly:
      return "hash_only";
    case HeaderMode::kPerKey:
      return "per_key";
  }
  return "none";
}

std::vector<std::string> record_tokens(const FeatureRecord& record,
                                       HeaderMode mode) {
  std::vector<std::string> tokens;
  std::unordered_set<std::string> seen;
  const auto emit = [&](std::string token) {
    if (seen.insert(token).second) tokens.push_back(std::move(token));
  };
  const auto emit_all = [&](std::string_view ns, const OrderedSet& set) {
    for (const auto& t : set.items()) emit(std::string(ns) + t);
  };
  emit_all("ver:", record.tls.versions);
  emit_all("cipher:", record.tls.ciphers);
  emit_all("ext:", record.tls.extensions);
  emit_all("encext:", record.tls.encrypted_extensions);
  emit_all("certext:", record.tls.certificate_extensions);
  emit_all("alert:", record.tls.alerts);

  if (mode == HeaderMode::kHashOnly && record.header) {
    emit("hdrhash:" + std::to_string(record.header->hash));
  }
  if (mode == HeaderMode::kPerKey) {
    for (const auto& key : record.header_keys) emit("hdrkey:" + key);
  }
  if (mode != HeaderMode::kNone && record.server_value) {
    emit("server:" + *record.server_value);
  }
  return tokens;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens,
                                   HeaderMode mode) {
  Vocabulary vocab(mode);
  for (auto& t : tokens) {
    if (vocab.index_of(t)) {
      throw Error(ErrorCode::kFormat, "duplicate vocabulary token '" + t + "'");
    }
    vocab.add(t);
  }
  return vocab;
}

std::uint32_t Vocabulary::add(std::string_view token) {
  const auto next = static_cast<std::uint32_t>(tokens_.size());
  auto [it, inserted] = index_.emplace(std::string(token), next);
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) {
    return it->second;
  }
  return std::nullopt;
}

Vocabulary build_vocabulary(std::span<const FeatureRecord> records,
                            HeaderMode mode) {
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "cannot build a vocabulary from zero records");
  }
  Vocabulary vocab(mode);
  for (const auto& r : records) {
    for (const auto& t : record_tokens(r, mode)) vocab.add(t);
  }
  return vocab;
}

FeatureVector vectorize(const FeatureRecord& record, const Vocabulary& vocab) {
  FeatureVector vec;
  vec.columns = vocab.size();
  for (const auto& t : record_tokens(record, vocab.mode())) {
    const auto col = vocab.index_of(t);
    if (!col) {
      throw Error(ErrorCode::kUnknownToken, "token '" + t + "' is not in the vocabulary");
    }
    vec.set_bits.push_back(*col);
  }
  std::sort(vec.set_bits.begin(), vec.set_bits.end());
  vec.set_bits.erase(std::unique(vec.set_bits.begin(), vec.set_bits.end()),
                     vec.set_bits.end());
  return vec;
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  detail::write_file(path, nlohmann::json(vocab.tokens()).dump(1) + "\n");
}

Vocabulary read_vocabulary(const std::filesystem::path& path, HeaderMode mode) {
  try {
    auto tokens = nlohmann::json::parse(detail::read_file(path))
                      .get<std::vector<std::string>>();
    return Vocabulary::from_tokens(std::move(tokens), mode);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

void write_vectors(const std::filesystem::path& path,
                   std::span<const FeatureVector> vectors) {
  std::string out;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = i;
    j["set_bits"] = vectors[i].set_bits;
    out += j.dump();
    out.push_back('\n');
  }
  detail::write_file(path, out);
}

std::vector<FeatureVector> read_vectors(const std::filesystem::path& path,
                                        std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<FeatureVector> vectors;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("id").get<std::size_t>();
      if (id != vectors.size()) {
        throw Error(ErrorCode::kFormat, path.string() + ": ids must be dense and ordered");
      }
      FeatureVector v;
      v.columns = columns;
      v.set_bits = j.at("set_bits").get<std::vector<std::uint32_t>>();
      for (auto bit : v.set_bits) {
        if (bit >= columns) {
          throw Error(ErrorCode::kFormat, path.string() + ": column out of range");
        }
      }
      vectors.push_back(std::move(v));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
    }
  }
  return vectors;
}

}  // namespace tlsmap
