#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tlsmap/ingest.hpp"

namespace tlsmap {

// Descriptive per-node metadata carried alongside the graph into renders,
// reports and queries. Node ids are positions in the indexed record list.
struct NodeInfo {
  std::string domain;
  std::string ip;
  std::string source;
  Label label = Label::kUnknown;
  std::optional<std::uint32_t> asn;
  std::string sha256_id;
  std::optional<std::uint32_t> hdrhash;
};

}  // namespace tlsmap
