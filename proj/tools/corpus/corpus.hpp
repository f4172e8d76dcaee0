#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tlsmap/http_headers.hpp"
#include "tlsmap/ingest.hpp"

namespace tlsmap::corpus {

// A server configuration: ten ClientHello responses in scanner notation.
struct ServerConfig {
  std::vector<std::string> segments;

  std::string raw() const;
};

// Random but well-formed configuration; about one segment in five is an alert.
ServerConfig random_config(std::mt19937_64& rng);

// Replaces the cipher of one handshake segment whose cipher also occurs in
// another segment, so the token set gains exactly `cipher` and loses nothing.
ServerConfig with_cipher_change(const ServerConfig& base, const std::string& cipher);

// Fresh four-hex-digit cipher code not present in `avoid`.
std::string fresh_cipher(std::mt19937_64& rng, const std::vector<std::string>& avoid);

struct CorpusDomain {
  std::string domain;
  std::string ip;
  std::string source;
  Label label = Label::kUnknown;
  std::string family;  // "A", "B" or "C"
  std::string raw_fingerprint;
  HeaderCapture capture;
};

struct Corpus {
  std::vector<CorpusDomain> domains;
};

struct PlantedSpec {
  std::size_t family_size = 20;
  std::uint64_t seed = 7;
};

// Family A is labelled bad, B good, C unknown. Member C_i is A_i's
// configuration with one cipher replaced. B members share one TLS
// configuration and differ only in header order.
Corpus planted_families(const PlantedSpec& spec);

// Writes bad.csv, good.csv, unknown.csv, scan.jsonl, captures.jsonl,
// asn.dat and pipeline.ini into `dir`. The config uses relative paths.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace tlsmap::corpus
