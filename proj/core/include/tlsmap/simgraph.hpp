#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tlsmap/simindex.hpp"

namespace tlsmap {

struct Edge {
  std::uint32_t u = 0;  // u < v
  std::uint32_t v = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n);
  std::uint32_t find(std::uint32_t x);
  // False when already joined.
  bool unite(std::uint32_t a, std::uint32_t b);

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
};

// Component ids numbered 0.. in order of each component's smallest node.
std::vector<std::uint32_t> label_components(std::size_t node_count,
                                            std::span<const Edge> edges,
                                            std::size_t* component_count = nullptr);

struct SimilarityGraph {
  std::size_t node_count = 0;
  std::vector<Edge> edges;  // sorted by (u, v), unique pairs
  std::vector<std::uint32_t> component;
  std::size_t component_count = 0;

  std::vector<std::size_t> degrees() const;
};

// Canonicalizes arbitrary edges: orients u < v, drops self-loops, keeps the
// minimum weight per pair and sorts.
SimilarityGraph make_graph(std::size_t node_count, std::vector<Edge> edges);

// Union of every node's k-NN list. Pairs at estimated distance 1.0 share no
// signature component and are not connected, so such nodes stay isolated.
SimilarityGraph build_knn_graph(const LshForest& forest, std::size_t k);

struct SpanningForest {
  std::size_t node_count = 0;
  std::vector<Edge> edges;  // in acceptance order
  std::vector<std::uint32_t> component;
  std::vector<double> component_weight;

  std::size_t component_count() const { return component_weight.size(); }
  double total_weight() const;
};

// Kruskal with edges ordered by (weight, u, v).
SpanningForest kruskal_msf(const SimilarityGraph& graph);

struct LayoutConfig {
  std::size_t iterations = 300;
  double edge_length = 1.0;
  // Components larger than this use grid-bucketed repulsion.
  std::size_t exact_repulsion_limit = 2000;
};

struct LayoutResult {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<std::uint32_t> s;  // edge sources
  std::vector<std::uint32_t> t;  // edge targets
};

// Seeded spring layout over the forest edges, one component at a time, with
// component bounding boxes shelf-packed so they never overlap.
LayoutResult layout_tree(const SpanningForest& forest, std::uint64_t seed,
                         const LayoutConfig& config = {});

// Edge list CSV "u,v,weight"; layout CSV "id,x,y".
void write_edges_csv(const std::filesystem::path& path, std::span<const Edge> edges);
std::vector<Edge> read_edges_csv(const std::filesystem::path& path);
void write_layout_csv(const std::filesystem::path& path, const LayoutResult& layout);
// Reattaches s/t from `forest`.
LayoutResult read_layout_csv(const std::filesystem::path& path,
                             const SpanningForest& forest);

}  // namespace tlsmap
