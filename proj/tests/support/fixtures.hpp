#pragma once

// Hand-built datasets shared by the unit tests and the acceptance binary.

#include <cstdint>
#include <string>
#include <vector>

#include "tlsmap/analysis.hpp"
#include "tlsmap/features.hpp"

namespace tlsmap::fixtures {

// One server: a TLS class id and an optional header variant.
struct Server {
  int tls_class = 0;
  int header_variant = -1;  // -1: no header capture
};

struct Group {
  std::string source;
  Label label = Label::kUnknown;
  std::vector<Server> servers;
};

struct GranularityFixture {
  std::vector<NodeInfo> nodes;
  std::vector<FeatureVector> tls_only;
  std::vector<FeatureVector> enriched;
};

inline FeatureRecord feature_record(const Server& s) {
  FeatureRecord r;
  r.tls.versions.insert("771");
  r.tls.ciphers.insert("c0" + std::to_string(s.tls_class));
  r.tls.extensions.insert("43.AwQ-51.29");
  if (s.header_variant >= 0) {
    HeaderCapture capture;
    capture.keys = {"Date", "Content-Type", "X-Variant-" + std::to_string(s.header_variant)};
    r.header = header_fingerprint(capture);
    r.header_keys = capture.keys;
  }
  return r;
}

// Both encodings run through the real vocabulary and vectorizer.
inline GranularityFixture granularity_fixture(const std::vector<Group>& groups) {
  GranularityFixture f;
  std::vector<FeatureRecord> records;
  for (const auto& g : groups) {
    for (const auto& s : g.servers) {
      NodeInfo n;
      n.domain = "n" + std::to_string(f.nodes.size()) + ".example";
      n.source = g.source;
      n.label = g.label;
      f.nodes.push_back(n);
      records.push_back(feature_record(s));
    }
  }
  const auto tls_vocab = build_vocabulary(records, HeaderMode::kNone);
  const auto rich_vocab = build_vocabulary(records, HeaderMode::kHashOnly);
  for (const auto& r : records) {
    f.tls_only.push_back(vectorize(r, tls_vocab));
    f.enriched.push_back(vectorize(r, rich_vocab));
  }
  return f;
}

// Three TLS classes, one of which splits three ways on headers: 3 -> 5.
inline std::vector<Group> three_to_five() {
  return {{"cloudflare", Label::kBad, {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {2, 0}, {2, 0}}}};
}

// A mix of groups, including ones with no headers at all and one group where
// headers add nothing.
inline std::vector<Group> mixed_groups() {
  return {
      {"toplist", Label::kGood, {{0, 0}, {0, 0}, {1, 3}, {1, 4}}},
      {"blocklist", Label::kBad, {{2, -1}, {3, -1}, {2, -1}}},
      {"blocklist", Label::kUnknown, {{4, 1}, {4, 1}, {4, 1}}},
      {"newly_registered", Label::kUnknown, {{0, 0}, {5, 2}, {5, 5}, {6, -1}, {6, 0}}},
  };
}

struct AuditFixture {
  std::vector<NodeInfo> nodes;
  SimilarityGraph graph;
  LayoutResult layout;
  Verdicts verdicts;
  std::vector<std::uint32_t> selected;  // ids of the audited neighbourhood
  Region region;                        // encloses exactly `selected`
};

// A neighbourhood of good/bad/unknown nodes of which `newly_bad` good or
// unknown ones carry a malicious external verdict, using `fingerprints`
// distinct sha256 ids. Ten unrelated nodes sit far away from the region.
inline AuditFixture audit_fixture(std::size_t good, std::size_t bad, std::size_t unknown,
                                  std::size_t newly_bad, std::size_t fingerprints) {
  AuditFixture f;
  std::vector<Label> labels;
  labels.insert(labels.end(), bad, Label::kBad);
  labels.insert(labels.end(), good, Label::kGood);
  labels.insert(labels.end(), unknown, Label::kUnknown);
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    NodeInfo n;
    n.domain = "m" + std::to_string(i) + ".example";
    n.label = labels[i];
    n.sha256_id = "fp" + std::to_string(i % fingerprints);
    const auto id = static_cast<std::uint32_t>(f.nodes.size());
    f.selected.push_back(id);
    f.layout.x.push_back(static_cast<double>(i % 15));
    f.layout.y.push_back(static_cast<double>(i / 15));
    if (n.label != Label::kBad) {
      f.verdicts[n.domain] = flagged < newly_bad ? "malicious" : "clean";
      flagged += flagged < newly_bad;
    }
    f.nodes.push_back(n);
  }
  for (std::size_t i = 0; i < 10; ++i) {
    NodeInfo n;
    n.domain = "far" + std::to_string(i) + ".example";
    n.label = Label::kGood;
    n.sha256_id = "far" + std::to_string(i);
    f.verdicts[n.domain] = "malicious";
    f.layout.x.push_back(1000.0 + static_cast<double>(i));
    f.layout.y.push_back(1000.0);
    f.nodes.push_back(n);
  }
  std::vector<Edge> edges;
  for (std::uint32_t i = 1; i < f.selected.size(); ++i) edges.push_back({i - 1, i, 0.1});
  f.graph = make_graph(f.nodes.size(), edges);
  f.region = {-0.5, -0.5, 14.5, static_cast<double>(labels.size() / 15) + 0.5};
  return f;
}

}  // namespace tlsmap::fixtures
