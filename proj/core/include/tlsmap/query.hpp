#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tlsmap/node.hpp"
#include "tlsmap/simgraph.hpp"

namespace tlsmap {

struct NeighborRow {
  std::uint32_t id = 0;
  std::string domain;
  Label label = Label::kUnknown;
  double distance = 0.0;
  std::string sha256_id;
  std::optional<std::uint32_t> hdrhash;
};

struct DomainQueryResult {
  std::uint32_t query_id = 0;
  // Other record ids carrying the same domain; the lowest id is queried.
  std::vector<std::uint32_t> duplicate_ids;
  std::vector<NeighborRow> rows;
};

// Nearest neighbours of the record whose domain matches (after
// normalization). Throws Error(kUnknownDomain).
DomainQueryResult query_domain(std::span<const NodeInfo> nodes, const LshForest& forest,
                               std::string_view domain, std::size_t k);

// Degree-zero nodes, ascending.
std::vector<std::uint32_t> list_outliers(const SimilarityGraph& graph);

// Ids whose sha256_id starts with `prefix` (full ids match exactly).
std::vector<std::uint32_t> find_fingerprint(std::span<const NodeInfo> nodes,
                                            std::string_view prefix);

enum class OutputFormat { kText, kCsv };
OutputFormat parse_output_format(std::string_view text);

std::string format_neighbors(std::span<const NeighborRow> rows, OutputFormat format);
std::string format_node_list(std::span<const NodeInfo> nodes,
                             std::span<const std::uint32_t> ids, OutputFormat format);

}  // namespace tlsmap
