#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tlsmap/node.hpp"
#include "tlsmap/simgraph.hpp"

namespace tlsmap {

enum class TooltipField { kDomain, kSha256Id, kHdrhash, kAsn, kSource, kLabel };

TooltipField parse_tooltip_field(std::string_view name);
std::string_view to_string(TooltipField field);

struct RenderSpec {
  std::string good_color = "#2ca02c";
  std::string bad_color = "#d62728";
  std::string unknown_color = "#ff7f0e";
  double point_size = 4.0;
  std::vector<TooltipField> tooltip_fields = {
      TooltipField::kDomain, TooltipField::kSha256Id, TooltipField::kHdrhash,
      TooltipField::kAsn,    TooltipField::kSource,   TooltipField::kLabel};
  std::string title = "tlsmap similarity map";

  const std::string& color_for(Label label) const;
  // Throws Error(kConfig) unless the three label colours are set and distinct.
  void validate() const;
};

// Self-contained HTML page: canvas viewer with pan, zoom and hover tooltips.
// Node and edge data are embedded as JSON in
// <script id="map-data" type="application/json">. Throws kAlignment when
// layout and nodes disagree.
std::string render_html(const LayoutResult& layout, std::span<const NodeInfo> nodes,
                        const RenderSpec& spec);
void render_html(const LayoutResult& layout, std::span<const NodeInfo> nodes,
                 const RenderSpec& spec, const std::filesystem::path& path);

// GraphML with node attributes (label, domain, sha256_id, hdrhash, asn, x, y)
// and per-edge weight plus an `mst` flag for edges drawn in the layout.
std::string export_graphml(const LayoutResult& layout, const SimilarityGraph& graph,
                           std::span<const NodeInfo> nodes);
void export_graphml(const LayoutResult& layout, const SimilarityGraph& graph,
                    std::span<const NodeInfo> nodes, const std::filesystem::path& path);

std::string xml_escape(std::string_view text);

// Writes <name>.html, <name>.graphml, <name>.nodes.csv and <name>.edges.csv.
void write_map_outputs(const std::filesystem::path& dir, const std::string& name,
                       const LayoutResult& layout, const SimilarityGraph& graph,
                       const SpanningForest& forest, std::span<const NodeInfo> nodes,
                       const RenderSpec& spec);

}  // namespace tlsmap
