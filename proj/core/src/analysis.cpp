#include "tlsmap/analysis.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "text_util.hpp"
#include "tlsmap/error.hpp"
#include "tlsmap/random.hpp"

namespace tlsmap {

std::size_t distinct_classes(std::span<const FeatureVector> vectors,
                             std::span<const std::uint32_t> ids) {
  std::set<std::vector<std::uint32_t>> classes;
  for (auto id : ids) classes.insert(vectors[id].set_bits);
  return classes.size();
}

namespace {

std::optional<double> percent_increase(std::size_t before, std::size_t after) {
  if (before == 0) return std::nullopt;
  return (static_cast<double>(after) - static_cast<double>(before)) /
         static_cast<double>(before) * 100.0;
}

std::string percent_text(const std::optional<double>& value) {
  return value ? detail::format_fixed(*value, 1) + "%" : "N/A";
}

}  // namespace

GranularityReport granularity_report(std::span<const NodeInfo> nodes,
                                     std::span<const FeatureVector> tls_only,
                                     std::span<const FeatureVector> enriched) {
  if (nodes.empty()) throw Error(ErrorCode::kEmptyDataset, "no records to compare");
  if (tls_only.size() != nodes.size() || enriched.size() != nodes.size()) {
    throw Error(ErrorCode::kAlignment, "vectors and records differ in length");
  }
  std::map<std::pair<std::string, int>, std::vector<std::uint32_t>> groups;
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    groups[{nodes[i].source, to_int(nodes[i].label)}].push_back(i);
  }
  GranularityReport report;
  for (const auto& [key, ids] : groups) {
    GranularityRow row;
    row.source = key.first;
    row.label = label_from_int(key.second);
    row.records = ids.size();
    row.tls_only = distinct_classes(tls_only, ids);
    row.enriched = distinct_classes(enriched, ids);
    row.percent_increase = percent_increase(row.tls_only, row.enriched);
    report.groups.push_back(std::move(row));
  }
  std::vector<std::uint32_t> all(nodes.size());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  report.total.source = "all";
  report.total.records = all.size();
  report.total.tls_only = distinct_classes(tls_only, all);
  report.total.enriched = distinct_classes(enriched, all);
  report.total.percent_increase = percent_increase(report.total.tls_only, report.total.enriched);
  return report;
}

std::string format_granularity_text(const GranularityReport& report) {
  std::ostringstream out;
  std::size_t width = 6;
  for (const auto& g : report.groups) width = std::max(width, g.source.size());
  const auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  out << pad("source", width) << "  " << pad("label", 7) << "  " << pad("records", 7) << "  "
      << pad("tls", 6) << "  " << pad("enrich", 6) << "  increase\n";
  const auto line = [&](const GranularityRow& r) {
    out << pad(r.source, width) << "  " << pad(r.label ? std::string(to_string(*r.label)) : "-", 7)
        << "  " << pad(std::to_string(r.records), 7) << "  " << pad(std::to_string(r.tls_only), 6)
        << "  " << pad(std::to_string(r.enriched), 6) << "  " << percent_text(r.percent_increase)
        << "\n";
  };
  for (const auto& g : report.groups) line(g);
  line(report.total);
  return out.str();
}

std::string format_granularity_csv(const GranularityReport& report) {
  std::string out = "source,label,records,tls_only,enriched,percent_increase\n";
  const auto line = [&](const GranularityRow& r) {
    out += r.source + "," + (r.label ? std::to_string(to_int(*r.label)) : "") + "," +
           std::to_string(r.records) + "," + std::to_string(r.tls_only) + "," +
           std::to_string(r.enriched) + "," +
           (r.percent_increase ? detail::format_fixed(*r.percent_increase, 3) : "N/A") + "\n";
  };
  for (const auto& g : report.groups) line(g);
  line(report.total);
  return out;
}

std::vector<StabilityRow> stability_sample(const LshForest& forest, std::size_t sample_size,
                                           std::size_t k, std::uint64_t seed) {
  if (forest.size() == 0) throw Error(ErrorCode::kEmptyIndex, "empty index");
  std::vector<StabilityRow> rows;
  for (auto id : seeded_sample(forest.size(), sample_size, seed)) {
    StabilityRow row{id, {}};
    for (const auto& nb : forest.query(id, k)) row.distances.push_back(nb.distance);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_stability_csv(std::span<const StabilityRow> rows) {
  std::string out = "id,rank,distance\n";
  for (const auto& row : rows) {
    for (std::size_t r = 0; r < row.distances.size(); ++r) {
      out += std::to_string(row.id) + "," + std::to_string(r + 1) + "," +
             detail::format_double(row.distances[r]) + "\n";
    }
  }
  return out;
}

Verdicts read_verdicts(const std::filesystem::path& path) {
  Verdicts verdicts;
  const std::string content = detail::read_file(path);
  bool first = true;
  for (auto line : detail::split(content, '\n')) {
    line = detail::trim(detail::chomp(line));
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != 2) {
      throw Error(ErrorCode::kFormat, path.string() + ": expected domain,verdict");
    }
    const auto domain = detail::trim(cells[0]);
    if (first && detail::iequals(domain, "domain")) {
      first = false;
      continue;
    }
    first = false;
    verdicts[normalize_domain(domain)] = std::string(detail::trim(cells[1]));
  }
  return verdicts;
}

bool is_bad_verdict(std::string_view verdict) {
  const auto v = detail::to_lower(detail::trim(verdict));
  return !(v == "clean" || v == "good" || v == "harmless" || v == "benign" ||
           v == "undetected" || v == "0");
}

NeighborhoodAudit neighborhood_audit(const SimilarityGraph& graph, const LayoutResult& layout,
                                     std::span<const NodeInfo> nodes, const Selection& selection,
                                     const Verdicts* verdicts) {
  NeighborhoodAudit audit;
  if (const auto* ids = std::get_if<std::vector<std::uint32_t>>(&selection)) {
    for (auto id : *ids) {
      if (id >= nodes.size()) {
        throw Error(ErrorCode::kUnknownId, "selected id " + std::to_string(id) + " is unknown");
      }
      audit.ids.push_back(id);
    }
  } else {
    const auto& region = std::get<Region>(selection);
    if (layout.x.size() != nodes.size()) {
      throw Error(ErrorCode::kAlignment, "layout and records differ in length");
    }
    for (std::uint32_t i = 0; i < nodes.size(); ++i) {
      if (region.contains(layout.x[i], layout.y[i])) audit.ids.push_back(i);
    }
  }
  std::sort(audit.ids.begin(), audit.ids.end());
  audit.ids.erase(std::unique(audit.ids.begin(), audit.ids.end()), audit.ids.end());
  if (audit.ids.empty()) throw Error(ErrorCode::kEmptySelection, "selection contains no nodes");

  const auto degrees = graph.node_count == nodes.size() ? graph.degrees()
                                                        : std::vector<std::size_t>{};
  std::set<std::string> fingerprints;
  std::size_t reclassified = 0;
  for (auto id : audit.ids) {
    const auto& node = nodes[id];
    switch (node.label) {
      case Label::kGood:
        ++audit.good;
        break;
      case Label::kBad:
        ++audit.bad;
        break;
      case Label::kUnknown:
        ++audit.unknown;
        break;
    }
    fingerprints.insert(node.sha256_id);
    if (!degrees.empty() && degrees[id] == 0) ++audit.outliers;
    if (verdicts && node.label != Label::kBad) {
      auto it = verdicts->find(node.domain);
      if (it != verdicts->end() && is_bad_verdict(it->second)) ++reclassified;
    }
  }
  audit.distinct_fingerprints = fingerprints.size();
  const double total = static_cast<double>(audit.total());
  audit.percent_bad = static_cast<double>(audit.bad) / total * 100.0;
  if (verdicts) {
    audit.reclassified = reclassified;
    const std::size_t not_bad = audit.good + audit.unknown;
    audit.percent_reclassified =
        not_bad ? static_cast<double>(reclassified) / static_cast<double>(not_bad) * 100.0 : 0.0;
    audit.percent_confirmed_bad =
        static_cast<double>(audit.bad + reclassified) / total * 100.0;
  }
  return audit;
}

std::string format_audit_text(const NeighborhoodAudit& audit) {
  std::ostringstream out;
  out << "Total Nodes: " << audit.total() << "\n"
      << "Known Good: " << audit.good << "\n"
      << "Known Bad: " << audit.bad << "\n"
      << "Unknown: " << audit.unknown << "\n"
      << "Distinct fingerprints: " << audit.distinct_fingerprints << "\n"
      << "Outliers: " << audit.outliers << "\n"
      << "Percent bad: " << detail::format_fixed(audit.percent_bad, 2) << "%\n";
  if (audit.reclassified) {
    out << "Newly identified malicious domains: " << *audit.reclassified << "\n"
        << "Good or unknown reclassified to bad: "
        << detail::format_fixed(*audit.percent_reclassified, 2) << "%\n"
        << "Confirmed malicious after reclassification: "
        << detail::format_fixed(*audit.percent_confirmed_bad, 2) << "%\n";
  }
  return out.str();
}

}  // namespace tlsmap
