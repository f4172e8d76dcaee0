#include "tlsmap/query.hpp"

#include <algorithm>

#include "text_util.hpp"
#include "tlsmap/error.hpp"

namespace tlsmap {

DomainQueryResult query_domain(std::span<const NodeInfo> nodes, const LshForest& forest,
                               std::string_view domain, std::size_t k) {
  const std::string wanted = normalize_domain(domain);
  std::vector<std::uint32_t> matches;
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].domain == wanted) matches.push_back(i);
  }
  if (matches.empty()) {
    throw Error(ErrorCode::kUnknownDomain, "domain '" + wanted + "' is not indexed");
  }
  DomainQueryResult result;
  result.query_id = matches.front();
  result.duplicate_ids.assign(matches.begin() + 1, matches.end());
  for (const auto& nb : forest.query(result.query_id, k)) {
    const auto& node = nodes[nb.id];
    result.rows.push_back({nb.id, node.domain, node.label, nb.distance, node.sha256_id,
                           node.hdrhash});
  }
  return result;
}

std::vector<std::uint32_t> list_outliers(const SimilarityGraph& graph) {
  std::vector<std::uint32_t> out;
  const auto degrees = graph.degrees();
  for (std::uint32_t i = 0; i < degrees.size(); ++i) {
    if (degrees[i] == 0) out.push_back(i);
  }
  return out;
}

std::vector<std::uint32_t> find_fingerprint(std::span<const NodeInfo> nodes,
                                            std::string_view prefix) {
  const std::string p = detail::to_lower(detail::trim(prefix));
  std::vector<std::uint32_t> out;
  if (p.empty()) return out;
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].sha256_id.compare(0, p.size(), p) == 0) out.push_back(i);
  }
  return out;
}

OutputFormat parse_output_format(std::string_view text) {
  const auto t = detail::to_lower(detail::trim(text));
  if (t == "text") return OutputFormat::kText;
  if (t == "csv") return OutputFormat::kCsv;
  throw Error(ErrorCode::kConfig, "unknown output format '" + std::string(text) + "'");
}

namespace {

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += row[c];
      if (c + 1 < row.size()) line.append(width[c] - row[c].size() + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

std::string join_csv(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out.push_back(',');
      out += row[c];
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace

std::string format_neighbors(std::span<const NeighborRow> rows, OutputFormat format) {
  std::vector<std::vector<std::string>> table = {
      {"rank", "id", "domain", "label", "distance", "sha256_id", "hdrhash"}};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    table.push_back({std::to_string(r + 1), std::to_string(row.id), row.domain,
                     std::string(to_string(row.label)), detail::format_fixed(row.distance, 4),
                     row.sha256_id, row.hdrhash ? std::to_string(*row.hdrhash) : ""});
  }
  return format == OutputFormat::kCsv ? join_csv(table) : render_table(table);
}

std::string format_node_list(std::span<const NodeInfo> nodes, std::span<const std::uint32_t> ids,
                             OutputFormat format) {
  std::vector<std::vector<std::string>> table = {
      {"id", "domain", "label", "source", "asn", "sha256_id", "hdrhash"}};
  for (auto id : ids) {
    const auto& n = nodes[id];
    table.push_back({std::to_string(id), n.domain, std::string(to_string(n.label)), n.source,
                     n.asn ? std::to_string(*n.asn) : "", n.sha256_id,
                     n.hdrhash ? std::to_string(*n.hdrhash) : ""});
  }
  return format == OutputFormat::kCsv ? join_csv(table) : render_table(table);
}

}  // namespace tlsmap
