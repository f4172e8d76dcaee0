#include "tlsmap/simgraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_map>

#include "text_util.hpp"
#include "tlsmap/error.hpp"

namespace tlsmap {

DisjointSets::DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
  std::iota(parent_.begin(), parent_.end(), 0u);
}

std::uint32_t DisjointSets::find(std::uint32_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool DisjointSets::unite(std::uint32_t a, std::uint32_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
  return true;
}

std::vector<std::uint32_t> label_components(std::size_t node_count,
                                            std::span<const Edge> edges,
                                            std::size_t* component_count) {
  DisjointSets sets(node_count);
  for (const auto& e : edges) sets.unite(e.u, e.v);
  std::vector<std::uint32_t> label(node_count);
  std::unordered_map<std::uint32_t, std::uint32_t> root_label;
  for (std::uint32_t i = 0; i < node_count; ++i) {
    const auto root = sets.find(i);
    auto [it, inserted] =
        root_label.emplace(root, static_cast<std::uint32_t>(root_label.size()));
    label[i] = it->second;
  }
  if (component_count) *component_count = root_label.size();
  return label;
}

std::vector<std::size_t> SimilarityGraph::degrees() const {
  std::vector<std::size_t> deg(node_count, 0);
  for (const auto& e : edges) {
    ++deg[e.u];
    ++deg[e.v];
  }
  return deg;
}

SimilarityGraph make_graph(std::size_t node_count, std::vector<Edge> edges) {
  for (auto& e : edges) {
    if (e.u >= node_count || e.v >= node_count) {
      throw Error(ErrorCode::kUnknownId, "edge endpoint out of range");
    }
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::erase_if(edges, [](const Edge& e) { return e.u == e.v; });
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.u != b.u) return a.u < b.u;
    if (a.v != b.v) return a.v < b.v;
    return a.weight < b.weight;
  });
  // After the sort the first of each (u, v) run carries the minimum weight.
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const Edge& a, const Edge& b) {
                            return a.u == b.u && a.v == b.v;
                          }),
              edges.end());
  SimilarityGraph graph;
  graph.node_count = node_count;
  graph.edges = std::move(edges);
  graph.component =
      label_components(node_count, graph.edges, &graph.component_count);
  return graph;
}

SimilarityGraph build_knn_graph(const LshForest& forest, std::size_t k) {
  if (forest.size() == 0) throw Error(ErrorCode::kEmptyIndex, "empty index");
  const std::size_t n = forest.size();
  std::vector<std::vector<Edge>> per_node(n);

  const std::size_t threads =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t id = w; id < n; id += threads) {
          for (const auto& nb : forest.query(static_cast<std::uint32_t>(id), k)) {
            if (nb.distance >= 1.0) continue;
            per_node[id].push_back({static_cast<std::uint32_t>(id), nb.id, nb.distance});
          }
        }
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::vector<Edge> edges;
  for (auto& list : per_node) edges.insert(edges.end(), list.begin(), list.end());
  return make_graph(n, std::move(edges));
}

double SpanningForest::total_weight() const {
  return std::accumulate(component_weight.begin(), component_weight.end(), 0.0);
}

SpanningForest kruskal_msf(const SimilarityGraph& graph) {
  std::vector<Edge> order = graph.edges;
  std::sort(order.begin(), order.end(), [](const Edge& a, const Edge& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });
  SpanningForest forest;
  forest.node_count = graph.node_count;
  DisjointSets sets(graph.node_count);
  for (const auto& e : order) {
    if (sets.unite(e.u, e.v)) forest.edges.push_back(e);
    if (forest.edges.size() + 1 == graph.node_count) break;
  }
  std::size_t count = 0;
  forest.component = label_components(graph.node_count, forest.edges, &count);
  forest.component_weight.assign(count, 0.0);
  for (const auto& e : forest.edges) {
    forest.component_weight[forest.component[e.u]] += e.weight;
  }
  return forest;
}

namespace {

struct Point {
  double x = 0;
  double y = 0;
};

// Radial tree drawing from the smallest id: each subtree gets an angular
// wedge proportional to its leaf count, depth maps to radius.
std::vector<Point> radial_start(const std::vector<std::uint32_t>& nodes,
                                const std::vector<std::vector<std::uint32_t>>& adj,
                                const std::unordered_map<std::uint32_t, std::size_t>& local,
                                double edge_length) {
  const std::size_t n = nodes.size();
  std::vector<std::int64_t> parent(n, -1);
  std::vector<std::size_t> depth(n, 0);
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  order.push_back(0);
  seen[0] = 1;
  for (std::size_t head = 0; head < order.size(); ++head) {
    const std::size_t cur = order[head];
    for (auto nb : adj[nodes[cur]]) {
      const std::size_t li = local.at(nb);
      if (seen[li]) continue;
      seen[li] = 1;
      parent[li] = static_cast<std::int64_t>(cur);
      depth[li] = depth[cur] + 1;
      order.push_back(li);
    }
  }
  std::vector<double> leaves(n, 0.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (leaves[*it] == 0.0) leaves[*it] = 1.0;
    if (parent[*it] >= 0) leaves[static_cast<std::size_t>(parent[*it])] += leaves[*it];
  }
  std::vector<Point> pos(n);
  std::vector<double> wedge_start(n, 0.0), wedge_size(n, 0.0);
  wedge_size[0] = 2.0 * std::numbers::pi;
  for (std::size_t cur : order) {
    double cursor = wedge_start[cur];
    for (auto nb : adj[nodes[cur]]) {
      const std::size_t li = local.at(nb);
      if (parent[li] != static_cast<std::int64_t>(cur)) continue;
      wedge_start[li] = cursor;
      wedge_size[li] = wedge_size[cur] * leaves[li] / leaves[cur];
      cursor += wedge_size[li];
      const double angle = wedge_start[li] + 0.5 * wedge_size[li];
      const double radius = edge_length * static_cast<double>(depth[li]);
      pos[li] = {radius * std::cos(angle), radius * std::sin(angle)};
    }
  }
  return pos;
}

void repulse_pair(std::vector<Point>& disp, const std::vector<Point>& pos, std::size_t i,
                  std::size_t j, double k2) {
  double dx = pos[i].x - pos[j].x;
  double dy = pos[i].y - pos[j].y;
  double d2 = dx * dx + dy * dy;
  if (d2 < 1e-18) {
    // Coincident points: separate along a fixed direction by index parity.
    dx = (i < j) ? 1e-6 : -1e-6;
    dy = 0.0;
    d2 = 1e-12;
  }
  const double f = k2 / d2;  // (k^2 / d) along the unit vector
  disp[i].x += dx * f;
  disp[i].y += dy * f;
  disp[j].x -= dx * f;
  disp[j].y -= dy * f;
}

std::vector<Point> layout_component(const std::vector<std::uint32_t>& nodes,
                                    const std::vector<std::vector<std::uint32_t>>& adj,
                                    std::uint64_t seed, const LayoutConfig& config) {
  const std::size_t n = nodes.size();
  if (n == 1) return {Point{}};
  std::unordered_map<std::uint32_t, std::size_t> local;
  for (std::size_t i = 0; i < n; ++i) local.emplace(nodes[i], i);

  const double k = config.edge_length;
  auto pos = radial_start(nodes, adj, local, k);
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * (nodes.front() + 1)));
  std::uniform_real_distribution<double> jitter(-0.05 * k, 0.05 * k);
  for (auto& p : pos) {
    p.x += jitter(rng);
    p.y += jitter(rng);
  }

  std::vector<std::pair<std::size_t, std::size_t>> springs;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto nb : adj[nodes[i]]) {
      const std::size_t j = local.at(nb);
      if (i < j) springs.emplace_back(i, j);
    }
  }

  const double k2 = k * k;
  const double t0 = 0.5 * k * std::sqrt(static_cast<double>(n));
  const bool exact = n <= config.exact_repulsion_limit;
  std::vector<Point> disp(n);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    std::fill(disp.begin(), disp.end(), Point{});
    if (exact) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) repulse_pair(disp, pos, i, j, k2);
      }
    } else {
      // Repulsion only between points in neighbouring cells of side 2k.
      const double cell = 2.0 * k;
      std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
      const auto key = [](std::int64_t cx, std::int64_t cy) {
        return (cx << 32) ^ (cy & 0xffffffff);
      };
      for (std::size_t i = 0; i < n; ++i) {
        grid[key(static_cast<std::int64_t>(std::floor(pos[i].x / cell)),
                 static_cast<std::int64_t>(std::floor(pos[i].y / cell)))]
            .push_back(i);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto cx = static_cast<std::int64_t>(std::floor(pos[i].x / cell));
        const auto cy = static_cast<std::int64_t>(std::floor(pos[i].y / cell));
        for (std::int64_t ox = -1; ox <= 1; ++ox) {
          for (std::int64_t oy = -1; oy <= 1; ++oy) {
            auto found = grid.find(key(cx + ox, cy + oy));
            if (found == grid.end()) continue;
            for (auto j : found->second) {
              if (j > i) repulse_pair(disp, pos, i, j, k2);
            }
          }
        }
      }
    }
    for (const auto& [i, j] : springs) {
      const double dx = pos[i].x - pos[j].x;
      const double dy = pos[i].y - pos[j].y;
      const double d = std::sqrt(dx * dx + dy * dy);
      const double f = d / k;  // (d^2 / k) along the unit vector
      disp[i].x -= dx * f;
      disp[i].y -= dy * f;
      disp[j].x += dx * f;
      disp[j].y += dy * f;
    }
    const double temp =
        t0 * (1.0 - static_cast<double>(it) / static_cast<double>(config.iterations)) + 1e-3 * k;
    for (std::size_t i = 0; i < n; ++i) {
      const double len = std::sqrt(disp[i].x * disp[i].x + disp[i].y * disp[i].y);
      if (len <= 0.0) continue;
      const double step = std::min(len, temp) / len;
      pos[i].x += disp[i].x * step;
      pos[i].y += disp[i].y * step;
    }
  }
  return pos;
}

}  // namespace

LayoutResult layout_tree(const SpanningForest& forest, std::uint64_t seed,
                         const LayoutConfig& config) {
  const std::size_t n = forest.node_count;
  LayoutResult out;
  out.x.assign(n, 0.0);
  out.y.assign(n, 0.0);
  for (const auto& e : forest.edges) {
    out.s.push_back(e.u);
    out.t.push_back(e.v);
  }
  if (n == 0) return out;

  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const auto& e : forest.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());

  std::vector<std::vector<std::uint32_t>> members(forest.component_count());
  for (std::uint32_t i = 0; i < n; ++i) members[forest.component[i]].push_back(i);

  struct Placed {
    std::vector<Point> pos;
    double width = 0;
    double height = 0;
    std::size_t index = 0;
  };
  std::vector<Placed> placed(members.size());
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto pos = layout_component(members[c], adj, seed, config);
    double min_x = pos[0].x, min_y = pos[0].y, max_x = pos[0].x, max_y = pos[0].y;
    for (const auto& p : pos) {
      min_x = std::min(min_x, p.x);
      min_y = std::min(min_y, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
    for (auto& p : pos) {
      p.x -= min_x;
      p.y -= min_y;
    }
    placed[c] = {std::move(pos), max_x - min_x, max_y - min_y, c};
  }

  // Shelf packing: largest components first, rows bounded by roughly the
  // square root of the total area.
  std::vector<std::size_t> order(placed.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return members[a].size() > members[b].size();
  });
  const double margin = 2.0 * config.edge_length;
  double area = 0, widest = 0;
  for (const auto& p : placed) {
    area += (p.width + margin) * (p.height + margin);
    widest = std::max(widest, p.width + margin);
  }
  const double row_limit = std::max(widest, std::sqrt(area));
  double cursor_x = 0, cursor_y = 0, row_height = 0;
  for (std::size_t c : order) {
    const auto& p = placed[c];
    if (cursor_x > 0 && cursor_x + p.width > row_limit) {
      cursor_x = 0;
      cursor_y += row_height + margin;
      row_height = 0;
    }
    for (std::size_t i = 0; i < members[c].size(); ++i) {
      out.x[members[c][i]] = p.pos[i].x + cursor_x;
      out.y[members[c][i]] = p.pos[i].y + cursor_y;
    }
    cursor_x += p.width + margin;
    row_height = std::max(row_height, p.height);
  }
  return out;
}

void write_edges_csv(const std::filesystem::path& path, std::span<const Edge> edges) {
  std::string out = "u,v,weight\n";
  for (const auto& e : edges) {
    out += std::to_string(e.u) + "," + std::to_string(e.v) + "," +
           detail::format_double(e.weight) + "\n";
  }
  detail::write_file(path, out);
}

std::vector<Edge> read_edges_csv(const std::filesystem::path& path) {
  const std::string content = detail::read_file(path);
  std::vector<Edge> edges;
  bool header = true;
  for (auto line : detail::split(content, '\n')) {
    line = detail::trim(detail::chomp(line));
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto cells = detail::split(line, ',');
    const auto u = cells.size() == 3 ? detail::parse_int<std::uint32_t>(cells[0]) : std::nullopt;
    const auto v = cells.size() == 3 ? detail::parse_int<std::uint32_t>(cells[1]) : std::nullopt;
    const auto w = cells.size() == 3 ? detail::parse_double(cells[2]) : std::nullopt;
    if (!u || !v || !w) {
      throw Error(ErrorCode::kFormat, path.string() + ": malformed edge row '" +
                                          std::string(line) + "'");
    }
    edges.push_back({*u, *v, *w});
  }
  return edges;
}

void write_layout_csv(const std::filesystem::path& path, const LayoutResult& layout) {
  std::string out = "id,x,y\n";
  for (std::size_t i = 0; i < layout.x.size(); ++i) {
    out += std::to_string(i) + "," + detail::format_double(layout.x[i]) + "," +
           detail::format_double(layout.y[i]) + "\n";
  }
  detail::write_file(path, out);
}

LayoutResult read_layout_csv(const std::filesystem::path& path,
                             const SpanningForest& forest) {
  const std::string content = detail::read_file(path);
  LayoutResult layout;
  bool header = true;
  for (auto line : detail::split(content, '\n')) {
    line = detail::trim(detail::chomp(line));
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto cells = detail::split(line, ',');
    const auto id = cells.size() == 3 ? detail::parse_int<std::size_t>(cells[0]) : std::nullopt;
    const auto x = cells.size() == 3 ? detail::parse_double(cells[1]) : std::nullopt;
    const auto y = cells.size() == 3 ? detail::parse_double(cells[2]) : std::nullopt;
    if (!id || !x || !y || *id != layout.x.size()) {
      throw Error(ErrorCode::kFormat, path.string() + ": malformed layout row '" +
                                          std::string(line) + "'");
    }
    layout.x.push_back(*x);
    layout.y.push_back(*y);
  }
  if (layout.x.size() != forest.node_count) {
    throw Error(ErrorCode::kAlignment, path.string() + ": layout size differs from forest");
  }
  for (const auto& e : forest.edges) {
    layout.s.push_back(e.u);
    layout.t.push_back(e.v);
  }
  return layout;
}

}  // namespace tlsmap
