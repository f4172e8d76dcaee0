#include <gtest/gtest.h>

#include <random>
#include <set>
#include <unordered_set>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "tlsmap/http_headers.hpp"
#include "tlsmap/tls_fingerprint.hpp"

namespace tlsmap {
namespace {

TEST(Mmh3, MatchesReferenceVectors) {
  for (const auto& v : oracle::mmh3_vectors()) {
    EXPECT_EQ(mmh3_32(v.input, v.seed), v.expected) << "input size " << v.input.size();
  }
}

TEST(Mmh3, EmptyInputWithZeroSeedIsZero) { EXPECT_EQ(mmh3_32(""), 0u); }

TEST(Mmh3, SeedChangesOutput) {
  std::mt19937_64 rng(5);
  int equal = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string s(1 + rng() % 40, '\0');
    for (auto& c : s) c = static_cast<char>(rng());
    equal += mmh3_32(s, 0) == mmh3_32(s, 1);
  }
  EXPECT_EQ(equal, 0);
}

TEST(Mmh3, FewCollisionsOnRandomCorpus) {
  std::mt19937_64 rng(11);
  std::set<std::string> inputs;
  while (inputs.size() < 10000) {
    std::string s(4 + rng() % 60, ' ');
    for (auto& c : s) c = static_cast<char>('A' + rng() % 58);
    inputs.insert(s);
  }
  std::unordered_set<std::uint32_t> hashes;
  for (const auto& s : inputs) hashes.insert(mmh3_32(s));
  EXPECT_LE(inputs.size() - hashes.size(), 5u);
}

TEST(Mmh3, UnalignedInputsAgree) {
  const std::string base = "xxThe quick brown fox jumps over the lazy dog";
  EXPECT_EQ(mmh3_32(std::string_view(base).substr(2)), 776992547u);
}

TEST(Sha256, MatchesReferenceVectors) {
  for (const auto& v : oracle::sha256_vectors()) {
    EXPECT_EQ(sha256_hex(v.input), v.expected) << "input size " << v.input.size();
  }
}

TEST(Sha256, DeterministicAndLowercaseHex) {
  const auto a = sha256_hex("fingerprint");
  EXPECT_EQ(a, sha256_hex("fingerprint"));
  EXPECT_EQ(a.size(), 64u);
  EXPECT_EQ(a.find_first_not_of("0123456789abcdef"), std::string::npos);
}

TEST(Sha256, FileDigestMatchesBytes) {
  testing::TempDir dir;
  testing::write_text(dir / "f", std::string(1000, 'a'));
  EXPECT_EQ(sha256_file_hex(dir / "f"),
            "41edece42d63e8d9bf515a9ba6932e1c20cbc9f5a5d134645adb5db1b9737ea3");
}

}  // namespace
}  // namespace tlsmap
