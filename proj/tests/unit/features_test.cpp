#include <gtest/gtest.h>

#include <random>
#include <set>

#include "corpus.hpp"
#include "temp_dir.hpp"
#include "tlsmap/error.hpp"
#include "tlsmap/features.hpp"

namespace tlsmap {
namespace {

using Tokens = std::vector<std::string>;

FeatureRecord record_from(std::string_view raw, std::optional<std::uint32_t> hdrhash = {},
                          std::optional<std::string> server = {}, Tokens keys = {}) {
  FeatureRecord r;
  r.tls = parse_raw(raw).dedup;
  if (hdrhash) r.header = HeaderFingerprint{"canonical", *hdrhash};
  r.server_value = std::move(server);
  r.header_keys = std::move(keys);
  return r;
}

TEST(Vocabulary, EnumeratesNamespacedTokensInFirstSeenOrder) {
  const std::vector<FeatureRecord> records = {record_from("771_1302", 7u, "cloudflare")};
  const auto vocab = build_vocabulary(records, HeaderMode::kHashOnly);
  EXPECT_EQ(vocab.tokens(), (Tokens{"ver:771", "cipher:1302", "hdrhash:7", "server:cloudflare"}));
}

TEST(Vocabulary, EveryCategoryHasItsNamespace) {
  const std::vector<FeatureRecord> records = {
      record_from("771_1301_e_enc_cert|______<40", 9u, "nginx")};
  const auto vocab = build_vocabulary(records, HeaderMode::kHashOnly);
  EXPECT_EQ(vocab.tokens(), (Tokens{"ver:771", "cipher:1301", "ext:e", "encext:enc",
                                    "certext:cert", "alert:40", "hdrhash:9", "server:nginx"}));
}

TEST(Vocabulary, CategoriesNeverCollide) {
  // The same literal as a cipher and an extension stays two columns.
  const std::vector<FeatureRecord> records = {record_from("771_abc_abc")};
  const auto vocab = build_vocabulary(records, HeaderMode::kNone);
  EXPECT_EQ(vocab.tokens(), (Tokens{"ver:771", "cipher:abc", "ext:abc"}));
}

TEST(Vocabulary, NoneModeDropsHeaderTokens) {
  const std::vector<FeatureRecord> records = {record_from("771_1302", 7u, "cloudflare", {"Server"})};
  EXPECT_EQ(build_vocabulary(records, HeaderMode::kNone).tokens(), (Tokens{"ver:771", "cipher:1302"}));
}

TEST(Vocabulary, PerKeyModeEmitsOneTokenPerKey) {
  const std::vector<FeatureRecord> records = {
      record_from("771_1302", 7u, "cloudflare", {"Server", "Date", "Server"})};
  EXPECT_EQ(build_vocabulary(records, HeaderMode::kPerKey).tokens(),
            (Tokens{"ver:771", "cipher:1302", "hdrkey:Server", "hdrkey:Date", "server:cloudflare"}));
}

TEST(Vocabulary, DeterministicAcrossRuns) {
  std::mt19937_64 rng(3);
  std::vector<FeatureRecord> records;
  for (int i = 0; i < 50; ++i) records.push_back(record_from(corpus::random_config(rng).raw(), rng() % 5));
  EXPECT_EQ(build_vocabulary(records, HeaderMode::kHashOnly).tokens(),
            build_vocabulary(records, HeaderMode::kHashOnly).tokens());
}

TEST(Vocabulary, EmptyDatasetIsError) {
  try {
    build_vocabulary({}, HeaderMode::kHashOnly);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDataset);
  }
}

TEST(Vocabulary, FromTokensRejectsDuplicates) {
  EXPECT_THROW(Vocabulary::from_tokens({"ver:771", "ver:771"}, HeaderMode::kNone), Error);
  const auto v = Vocabulary::from_tokens({"a", "b"}, HeaderMode::kNone);
  EXPECT_EQ(v.index_of("b"), 1u);
  EXPECT_FALSE(v.index_of("c"));
}

TEST(Vectorize, DirectEncoding) {
  const auto vocab = Vocabulary::from_tokens(
      {"ver:771", "cipher:1301", "cipher:1302", "cipher:c030", "ext:x"}, HeaderMode::kNone);
  const auto vec = vectorize(record_from("771_c030"), vocab);
  EXPECT_EQ(vec.columns, 5u);
  EXPECT_EQ(vec.set_bits, (std::vector<std::uint32_t>{0, 3}));
}

TEST(Vectorize, ZeroTokenRecordIsEmpty) {
  const auto vocab = Vocabulary::from_tokens({"ver:771"}, HeaderMode::kNone);
  const auto vec = vectorize(FeatureRecord{}, vocab);
  EXPECT_TRUE(vec.empty());
  EXPECT_EQ(vec.columns, 1u);
}

TEST(Vectorize, RepeatedTokensSetOneBit) {
  const std::vector<FeatureRecord> records = {record_from("771_1302|771_1302|771_1302")};
  const auto vocab = build_vocabulary(records, HeaderMode::kNone);
  EXPECT_EQ(vectorize(records[0], vocab).set_bits, (std::vector<std::uint32_t>{0, 1}));
}

TEST(Vectorize, UnknownTokenIsError) {
  const auto vocab = Vocabulary::from_tokens({"ver:771"}, HeaderMode::kNone);
  try {
    vectorize(record_from("771_1302"), vocab);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownToken);
  }
}

TEST(Vectorize, IndependentOfRecordOrder) {
  std::mt19937_64 rng(8);
  std::vector<FeatureRecord> records;
  for (int i = 0; i < 30; ++i) records.push_back(record_from(corpus::random_config(rng).raw(), rng() % 4));
  const auto vocab = build_vocabulary(records, HeaderMode::kHashOnly);
  std::vector<FeatureVector> forward, backward;
  for (const auto& r : records) forward.push_back(vectorize(r, vocab));
  for (auto it = records.rbegin(); it != records.rend(); ++it) backward.push_back(vectorize(*it, vocab));
  std::reverse(backward.begin(), backward.end());
  EXPECT_EQ(forward, backward);
}

// Random records sharing a handful of TLS configurations and header hashes.
std::vector<FeatureRecord> clustered_records(std::uint64_t seed, std::size_t n, std::size_t configs,
                                             std::size_t headers) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> raws;
  for (std::size_t i = 0; i < configs; ++i) raws.push_back(corpus::random_config(rng).raw());
  std::vector<FeatureRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool has_header = rng() % 8 != 0;
    std::optional<std::uint32_t> hash;
    std::optional<std::string> server;
    if (has_header) {
      hash = static_cast<std::uint32_t>(rng() % headers);
      server = "srv" + std::to_string(rng() % 3);
    }
    out.push_back(record_from(raws[rng() % raws.size()], hash, server));
  }
  return out;
}

TEST(Refinement, EnrichedWidthNeverSmaller) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto records = clustered_records(seed, 200, 5, 40);
    EXPECT_GE(build_vocabulary(records, HeaderMode::kHashOnly).size(),
              build_vocabulary(records, HeaderMode::kNone).size());
  }
}

TEST(Refinement, EnrichmentOnlySplitsClasses) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto records = clustered_records(seed, 200, 6, 10);
    const auto tls = build_vocabulary(records, HeaderMode::kNone);
    const auto rich = build_vocabulary(records, HeaderMode::kHashOnly);
    for (std::size_t i = 0; i < records.size(); ++i) {
      for (std::size_t j = i + 1; j < records.size(); ++j) {
        if (vectorize(records[i], rich) == vectorize(records[j], rich)) {
          EXPECT_EQ(vectorize(records[i], tls), vectorize(records[j], tls));
        }
      }
    }
  }
}

TEST(Refinement, CdnLikeCorpusWidensByAnOrderOfMagnitude) {
  // Few TLS profiles, many header layouts: the enriched width is dominated by
  // header tokens while the TLS-only width stays in the tens.
  const auto records = clustered_records(99, 5000, 4, 800);
  const auto tls = build_vocabulary(records, HeaderMode::kNone).size();
  const auto rich = build_vocabulary(records, HeaderMode::kHashOnly).size();
  EXPECT_LT(tls, 100u);
  EXPECT_GT(rich, 10 * tls);
}

TEST(Files, VocabularyAndVectorsRoundTrip) {
  testing::TempDir dir;
  const auto records = clustered_records(4, 20, 3, 5);
  const auto vocab = build_vocabulary(records, HeaderMode::kHashOnly);
  std::vector<FeatureVector> vectors;
  for (const auto& r : records) vectors.push_back(vectorize(r, vocab));
  write_vocabulary(dir / "v.json", vocab);
  write_vectors(dir / "x.jsonl", vectors);
  EXPECT_EQ(read_vocabulary(dir / "v.json", HeaderMode::kHashOnly).tokens(), vocab.tokens());
  EXPECT_EQ(read_vectors(dir / "x.jsonl", vocab.size()), vectors);
  EXPECT_THROW(read_vectors(dir / "x.jsonl", 1), Error);
}

TEST(HeaderMode, ParsesNames) {
  EXPECT_EQ(parse_header_mode("none"), HeaderMode::kNone);
  EXPECT_EQ(parse_header_mode("hash_only"), HeaderMode::kHashOnly);
  EXPECT_EQ(parse_header_mode("per_key"), HeaderMode::kPerKey);
  EXPECT_EQ(to_string(HeaderMode::kPerKey), "per_key");
  EXPECT_THROW(parse_header_mode("all"), Error);
}

}  // namespace
}  // namespace tlsmap
