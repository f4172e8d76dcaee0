#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "tlsmap/features.hpp"
#include "tlsmap/node.hpp"
#include "tlsmap/simgraph.hpp"

namespace tlsmap {

// Number of distinct fingerprint classes (equal set_bits) among `ids`.
std::size_t distinct_classes(std::span<const FeatureVector> vectors,
                             std::span<const std::uint32_t> ids);

struct GranularityRow {
  std::string source;
  std::optional<Label> label;  // nullopt on the totals row
  std::size_t records = 0;
  std::size_t tls_only = 0;
  std::size_t enriched = 0;
  // (enriched - tls_only) / tls_only * 100; nullopt when tls_only == 0.
  std::optional<double> percent_increase;
};

struct GranularityReport {
  std::vector<GranularityRow> groups;  // sorted by (source, label)
  GranularityRow total;
};

// Distinct-class counts under both encodings per (source, label) group.
// Throws kEmptyDataset / kAlignment.
GranularityReport granularity_report(std::span<const NodeInfo> nodes,
                                     std::span<const FeatureVector> tls_only,
                                     std::span<const FeatureVector> enriched);

std::string format_granularity_text(const GranularityReport& report);
std::string format_granularity_csv(const GranularityReport& report);

struct StabilityRow {
  std::uint32_t id = 0;
  std::vector<double> distances;  // non-decreasing, at most k
};

// Seeded sample of indexed ids, each queried for its k nearest neighbours.
// sample_size is clamped to the index size.
std::vector<StabilityRow> stability_sample(const LshForest& forest,
                                           std::size_t sample_size, std::size_t k,
                                           std::uint64_t seed);

// "id,rank,distance" with 1-based rank.
std::string format_stability_csv(std::span<const StabilityRow> rows);

struct Region {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

using Selection = std::variant<std::vector<std::uint32_t>, Region>;

// domain -> external verdict, e.g. from a reputation service export.
using Verdicts = std::unordered_map<std::string, std::string>;

// CSV "domain,verdict"; a header row is skipped when its first cell is
// "domain".
Verdicts read_verdicts(const std::filesystem::path& path);

// Anything other than clean/good/harmless/benign/undetected counts as bad.
bool is_bad_verdict(std::string_view verdict);

struct NeighborhoodAudit {
  std::vector<std::uint32_t> ids;  // sorted, unique
  std::size_t good = 0;
  std::size_t bad = 0;
  std::size_t unknown = 0;
  std::size_t distinct_fingerprints = 0;  // distinct sha256 ids
  std::size_t outliers = 0;               // selected nodes with no graph edge
  double percent_bad = 0.0;

  // Present only when verdicts were supplied.
  std::optional<std::size_t> reclassified;  // good/unknown nodes with a bad verdict
  std::optional<double> percent_reclassified;  // of good + unknown
  std::optional<double> percent_confirmed_bad;  // (bad + reclassified) / total

  std::size_t total() const { return good + bad + unknown; }
};

// Throws Error(kEmptySelection) when the selection resolves to no nodes.
NeighborhoodAudit neighborhood_audit(const SimilarityGraph& graph,
                                     const LayoutResult& layout,
                                     std::span<const NodeInfo> nodes,
                                     const Selection& selection,
                                     const Verdicts* verdicts = nullptr);

std::string format_audit_text(const NeighborhoodAudit& audit);

}  // namespace tlsmap
