#include "tlsmap/render.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "tlsmap/error.hpp"

namespace tlsmap {

TooltipField parse_tooltip_field(std::string_view name) {
  const auto n = detail::to_lower(detail::trim(name));
  if (n == "domain") return TooltipField::kDomain;
  if (n == "sha256_id") return TooltipField::kSha256Id;
  if (n == "hdrhash") return TooltipField::kHdrhash;
  if (n == "asn") return TooltipField::kAsn;
  if (n == "source") return TooltipField::kSource;
  if (n == "label") return TooltipField::kLabel;
  throw Error(ErrorCode::kConfig, "unknown tooltip field '" + std::string(name) + "'");
}

std::string_view to_string(TooltipField field) {
  switch (field) {
    case TooltipField::kDomain:
      return "domain";
    case TooltipField::kSha256Id:
      return "sha256_id";
    case TooltipField::kHdrhash:
      return "hdrhash";
    case TooltipField::kAsn:
      return "asn";
    case TooltipField::kSource:
      return "source";
    case TooltipField::kLabel:
      return "label";
  }
  return "domain";
}

const std::string& RenderSpec::color_for(Label label) const {
  switch (label) {
    case Label::kGood:
      return good_color;
    case Label::kBad:
      return bad_color;
    case Label::kUnknown:
      return unknown_color;
  }
  return unknown_color;
}

void RenderSpec::validate() const {
  if (good_color.empty() || bad_color.empty() || unknown_color.empty()) {
    throw Error(ErrorCode::kConfig, "every label needs a colour");
  }
  const std::set<std::string> distinct{detail::to_lower(good_color),
                                       detail::to_lower(bad_color),
                                       detail::to_lower(unknown_color)};
  if (distinct.size() != 3) {
    throw Error(ErrorCode::kConfig, "label colours must be distinct");
  }
}

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += "&apos;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

namespace {

void check_alignment(const LayoutResult& layout, std::size_t node_count) {
  if (layout.x.size() != node_count || layout.y.size() != node_count) {
    throw Error(ErrorCode::kAlignment,
                "layout has " + std::to_string(layout.x.size()) + " nodes but " +
                    std::to_string(node_count) + " records were given");
  }
  if (layout.s.size() != layout.t.size()) {
    throw Error(ErrorCode::kAlignment, "layout edge lists differ in length");
  }
  for (std::size_t i = 0; i < layout.s.size(); ++i) {
    if (layout.s[i] >= node_count || layout.t[i] >= node_count) {
      throw Error(ErrorCode::kAlignment, "layout edge references an unknown node");
    }
  }
}

std::string tooltip_value(const NodeInfo& node, TooltipField field) {
  switch (field) {
    case TooltipField::kDomain:
      return node.domain;
    case TooltipField::kSha256Id:
      return node.sha256_id;
    case TooltipField::kHdrhash:
      return node.hdrhash ? std::to_string(*node.hdrhash) : "";
    case TooltipField::kAsn:
      return node.asn ? std::to_string(*node.asn) : "";
    case TooltipField::kSource:
      return node.source;
    case TooltipField::kLabel:
      return std::string(to_string(node.label));
  }
  return "";
}

// JSON destined for a <script> element must not contain "</script>" or
// HTML-significant characters; inside JSON strings the \u escapes are
// equivalent.
std::string script_safe(const std::string& json) {
  std::string out;
  out.reserve(json.size());
  for (char c : json) {
    switch (c) {
      case '<':
        out += "\\u003c";
        break;
      case '>':
        out += "\\u003e";
        break;
      case '&':
        out += "\\u0026";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

constexpr std::string_view kHtmlHead = R"(<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<meta name="viewport" content="width=device-width, initial-scale=1">
<title>)";

constexpr std::string_view kHtmlStyle = R"(</title>
<style>
html, body { margin: 0; height: 100%; overflow: hidden; background: #ffffff; font: 12px sans-serif; }
canvas { display: block; cursor: grab; }
#tip { position: absolute; pointer-events: none; display: none; white-space: pre; background: rgba(255, 255, 255, 0.95); border: 1px solid #999999; padding: 4px 6px; }
#legend { position: absolute; top: 8px; left: 8px; background: rgba(255, 255, 255, 0.9); border: 1px solid #cccccc; padding: 4px 8px; }
#legend span { display: inline-block; width: 10px; height: 10px; margin: 0 4px 0 8px; }
</style>
</head>
<body>
<canvas id="map"></canvas>
<div id="tip"></div>
<div id="legend"></div>
<script id="map-data" type="application/json">)";

constexpr std::string_view kHtmlScript = R"(</script>
<script>
(function () {
  var data = JSON.parse(document.getElementById("map-data").textContent);
  var canvas = document.getElementById("map");
  var ctx = canvas.getContext("2d");
  var tip = document.getElementById("tip");
  var n = data.x.length;
  var view = { scale: 1, ox: 0, oy: 0 };
  var drag = null;

  var legend = document.getElementById("legend");
  [["good", 0], ["bad", 1], ["unknown", 3]].forEach(function (entry) {
    var swatch = document.createElement("span");
    swatch.style.background = data.colors[String(entry[1])];
    legend.appendChild(swatch);
    legend.appendChild(document.createTextNode(entry[0]));
  });

  function fit() {
    if (!n) return;
    var minX = Infinity, minY = Infinity, maxX = -Infinity, maxY = -Infinity;
    for (var i = 0; i < n; i++) {
      minX = Math.min(minX, data.x[i]); maxX = Math.max(maxX, data.x[i]);
      minY = Math.min(minY, data.y[i]); maxY = Math.max(maxY, data.y[i]);
    }
    var w = Math.max(maxX - minX, 1), h = Math.max(maxY - minY, 1);
    view.scale = 0.9 * Math.min(canvas.width / w, canvas.height / h);
    view.ox = canvas.width / 2 - view.scale * (minX + maxX) / 2;
    view.oy = canvas.height / 2 - view.scale * (minY + maxY) / 2;
  }
  function px(i) { return view.ox + view.scale * data.x[i]; }
  function py(i) { return view.oy + view.scale * data.y[i]; }

  function draw() {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.strokeStyle = "#bbbbbb";
    ctx.lineWidth = 1;
    ctx.beginPath();
    for (var e = 0; e < data.s.length; e++) {
      ctx.moveTo(px(data.s[e]), py(data.s[e]));
      ctx.lineTo(px(data.t[e]), py(data.t[e]));
    }
    ctx.stroke();
    var r = data.size;
    for (var i = 0; i < n; i++) {
      ctx.fillStyle = data.colors[String(data.label[i])];
      ctx.beginPath();
      ctx.arc(px(i), py(i), r, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  function resize() {
    canvas.width = window.innerWidth;
    canvas.height = window.innerHeight;
    fit();
    draw();
  }

  function nearest(mx, my) {
    var best = -1, bestD = Math.pow(Math.max(8, data.size + 2), 2);
    for (var i = 0; i < n; i++) {
      var dx = px(i) - mx, dy = py(i) - my, d = dx * dx + dy * dy;
      if (d <= bestD) { bestD = d; best = i; }
    }
    return best;
  }

  canvas.addEventListener("wheel", function (ev) {
    ev.preventDefault();
    var f = Math.exp(-ev.deltaY * 0.0015);
    view.ox = ev.offsetX - f * (ev.offsetX - view.ox);
    view.oy = ev.offsetY - f * (ev.offsetY - view.oy);
    view.scale *= f;
    draw();
  }, { passive: false });
  canvas.addEventListener("mousedown", function (ev) {
    drag = { x: ev.clientX, y: ev.clientY, ox: view.ox, oy: view.oy };
    canvas.style.cursor = "grabbing";
  });
  window.addEventListener("mouseup", function () {
    drag = null;
    canvas.style.cursor = "grab";
  });
  canvas.addEventListener("mousemove", function (ev) {
    if (drag) {
      view.ox = drag.ox + ev.clientX - drag.x;
      view.oy = drag.oy + ev.clientY - drag.y;
      draw();
      tip.style.display = "none";
      return;
    }
    var i = nearest(ev.offsetX, ev.offsetY);
    if (i < 0) { tip.style.display = "none"; return; }
    var lines = [];
    for (var f = 0; f < data.fields.length; f++) {
      lines.push(data.fields[f] + ": " + data.tips[i][f]);
    }
    tip.textContent = lines.join("\n");
    tip.style.left = (ev.clientX + 12) + "px";
    tip.style.top = (ev.clientY + 12) + "px";
    tip.style.display = "block";
  });
  window.addEventListener("resize", resize);
  resize();
})();
</script>
</body>
</html>
)";

}  // namespace

std::string render_html(const LayoutResult& layout, std::span<const NodeInfo> nodes,
                        const RenderSpec& spec) {
  spec.validate();
  check_alignment(layout, nodes.size());

  nlohmann::ordered_json data;
  data["x"] = layout.x;
  data["y"] = layout.y;
  auto labels = nlohmann::ordered_json::array();
  auto tips = nlohmann::ordered_json::array();
  for (const auto& node : nodes) {
    labels.push_back(to_int(node.label));
    auto row = nlohmann::ordered_json::array();
    for (auto field : spec.tooltip_fields) row.push_back(tooltip_value(node, field));
    tips.push_back(std::move(row));
  }
  data["label"] = std::move(labels);
  data["s"] = layout.s;
  data["t"] = layout.t;
  auto fields = nlohmann::ordered_json::array();
  for (auto field : spec.tooltip_fields) fields.push_back(std::string(to_string(field)));
  data["fields"] = std::move(fields);
  data["tips"] = std::move(tips);
  data["colors"] = {{"0", spec.good_color}, {"1", spec.bad_color}, {"3", spec.unknown_color}};
  data["size"] = spec.point_size;

  std::string html;
  html += kHtmlHead;
  html += xml_escape(spec.title);
  html += kHtmlStyle;
  html += script_safe(data.dump());
  html += kHtmlScript;
  return html;
}

void render_html(const LayoutResult& layout, std::span<const NodeInfo> nodes,
                 const RenderSpec& spec, const std::filesystem::path& path) {
  detail::write_file(path, render_html(layout, nodes, spec));
}

std::string export_graphml(const LayoutResult& layout, const SimilarityGraph& graph,
                           std::span<const NodeInfo> nodes) {
  check_alignment(layout, nodes.size());
  if (graph.node_count != nodes.size()) {
    throw Error(ErrorCode::kAlignment, "graph and records disagree on node count");
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> drawn;
  for (std::size_t i = 0; i < layout.s.size(); ++i) {
    drawn.emplace(std::min(layout.s[i], layout.t[i]), std::max(layout.s[i], layout.t[i]));
  }

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out +=
      "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" "
      "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" "
      "xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns "
      "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n";
  const auto key = [&](const char* id, const char* domain, const char* type) {
    out += std::string("  <key id=\"") + id + "\" for=\"" + domain + "\" attr.name=\"" + id +
           "\" attr.type=\"" + type + "\"/>\n";
  };
  key("label", "node", "int");
  key("domain", "node", "string");
  key("sha256_id", "node", "string");
  key("hdrhash", "node", "long");
  key("asn", "node", "long");
  key("x", "node", "double");
  key("y", "node", "double");
  key("weight", "edge", "double");
  key("mst", "edge", "boolean");
  out += "  <graph id=\"G\" edgedefault=\"undirected\">\n";

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    out += "    <node id=\"n" + std::to_string(i) + "\">";
    out += "<data key=\"label\">" + std::to_string(to_int(node.label)) + "</data>";
    out += "<data key=\"domain\">" + xml_escape(node.domain) + "</data>";
    out += "<data key=\"sha256_id\">" + xml_escape(node.sha256_id) + "</data>";
    if (node.hdrhash) {
      out += "<data key=\"hdrhash\">" + std::to_string(*node.hdrhash) + "</data>";
    }
    if (node.asn) out += "<data key=\"asn\">" + std::to_string(*node.asn) + "</data>";
    out += "<data key=\"x\">" + detail::format_double(layout.x[i]) + "</data>";
    out += "<data key=\"y\">" + detail::format_double(layout.y[i]) + "</data>";
    out += "</node>\n";
  }

  std::size_t edge_id = 0;
  const auto edge = [&](std::uint32_t u, std::uint32_t v, const double* weight, bool mst) {
    out += "    <edge id=\"e" + std::to_string(edge_id++) + "\" source=\"n" + std::to_string(u) +
           "\" target=\"n" + std::to_string(v) + "\">";
    if (weight) out += "<data key=\"weight\">" + detail::format_double(*weight) + "</data>";
    out += std::string("<data key=\"mst\">") + (mst ? "1" : "0") + "</data>";
    out += "</edge>\n";
  };
  std::set<std::pair<std::uint32_t, std::uint32_t>> emitted;
  for (const auto& e : graph.edges) {
    const bool mst = drawn.count({e.u, e.v}) != 0;
    edge(e.u, e.v, &e.weight, mst);
    emitted.emplace(e.u, e.v);
  }
  for (const auto& [u, v] : drawn) {
    if (!emitted.count({u, v})) edge(u, v, nullptr, true);
  }
  out += "  </graph>\n</graphml>\n";
  return out;
}

void export_graphml(const LayoutResult& layout, const SimilarityGraph& graph,
                    std::span<const NodeInfo> nodes, const std::filesystem::path& path) {
  detail::write_file(path, export_graphml(layout, graph, nodes));
}

namespace {

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void write_map_outputs(const std::filesystem::path& dir, const std::string& name,
                       const LayoutResult& layout, const SimilarityGraph& graph,
                       const SpanningForest& forest, std::span<const NodeInfo> nodes,
                       const RenderSpec& spec) {
  render_html(layout, nodes, spec, dir / (name + ".html"));
  export_graphml(layout, graph, nodes, dir / (name + ".graphml"));

  const auto degrees = graph.degrees();
  std::string node_csv = "id,domain,ip,source,label,asn,sha256_id,hdrhash,x,y,degree\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    node_csv += std::to_string(i) + "," + csv_field(n.domain) + "," + csv_field(n.ip) + "," +
                csv_field(n.source) + "," + std::to_string(to_int(n.label)) + "," +
                (n.asn ? std::to_string(*n.asn) : "") + "," + n.sha256_id + "," +
                (n.hdrhash ? std::to_string(*n.hdrhash) : "") + "," +
                detail::format_double(layout.x[i]) + "," + detail::format_double(layout.y[i]) +
                "," + std::to_string(degrees[i]) + "\n";
  }
  detail::write_file(dir / (name + ".nodes.csv"), node_csv);
  write_edges_csv(dir / (name + ".edges.csv"), forest.edges);
}

}  // namespace tlsmap
