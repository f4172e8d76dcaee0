#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "temp_dir.hpp"
#include "tlsmap/error.hpp"

namespace tlsmap {
namespace {

TEST(Granularity, ThreeToFiveIsSixtySixPointSeven) {
  const auto f = fixtures::granularity_fixture(fixtures::three_to_five());
  const auto report = granularity_report(f.nodes, f.tls_only, f.enriched);
  ASSERT_EQ(report.groups.size(), 1u);
  const auto& g = report.groups[0];
  EXPECT_EQ(g.tls_only, 3u);
  EXPECT_EQ(g.enriched, 5u);
  ASSERT_TRUE(g.percent_increase);
  EXPECT_NEAR(*g.percent_increase, 66.7, 0.05);
  EXPECT_NE(format_granularity_text(report).find("66.7%"), std::string::npos);
  EXPECT_NE(format_granularity_csv(report).find(",6,3,5,66.667"), std::string::npos);
}

TEST(Granularity, UniformHeadersGiveZeroIncrease) {
  const auto f = fixtures::granularity_fixture(
      {{"toplist", Label::kGood, {{0, 1}, {1, 1}, {2, 1}, {2, 1}}}});
  const auto report = granularity_report(f.nodes, f.tls_only, f.enriched);
  EXPECT_EQ(report.groups[0].tls_only, 3u);
  EXPECT_EQ(report.groups[0].enriched, 3u);
  EXPECT_DOUBLE_EQ(*report.groups[0].percent_increase, 0.0);
}

TEST(Granularity, EnrichedNeverCoarserPerGroup) {
  const auto f = fixtures::granularity_fixture(fixtures::mixed_groups());
  const auto report = granularity_report(f.nodes, f.tls_only, f.enriched);
  EXPECT_EQ(report.groups.size(), 4u);
  for (const auto& g : report.groups) {
    EXPECT_GE(g.enriched, g.tls_only) << g.source;
    EXPECT_LE(g.enriched, g.records);
  }
  EXPECT_GE(report.total.enriched, report.total.tls_only);
  EXPECT_EQ(report.total.records, f.nodes.size());
  // Groups are sorted by (source, label).
  for (std::size_t i = 1; i < report.groups.size(); ++i) {
    const auto& a = report.groups[i - 1];
    const auto& b = report.groups[i];
    EXPECT_TRUE(a.source < b.source || (a.source == b.source && to_int(*a.label) < to_int(*b.label)));
  }
}

TEST(Granularity, RandomFixturesRespectRefinement) {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 30; ++round) {
    std::vector<fixtures::Group> groups;
    for (int g = 0; g < 4; ++g) {
      fixtures::Group group{"src" + std::to_string(g % 2), g < 2 ? Label::kBad : Label::kGood, {}};
      const int size = 1 + static_cast<int>(rng() % 12);
      for (int i = 0; i < size; ++i) {
        group.servers.push_back({static_cast<int>(rng() % 5), static_cast<int>(rng() % 4) - 1});
      }
      groups.push_back(group);
    }
    const auto f = fixtures::granularity_fixture(groups);
    const auto report = granularity_report(f.nodes, f.tls_only, f.enriched);
    for (const auto& g : report.groups) EXPECT_GE(g.enriched, g.tls_only);
  }
}

TEST(Granularity, Errors) {
  EXPECT_THROW(granularity_report({}, {}, {}), Error);
  auto f = fixtures::granularity_fixture(fixtures::three_to_five());
  f.enriched.pop_back();
  try {
    granularity_report(f.nodes, f.tls_only, f.enriched);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlignment);
  }
}

TEST(DistinctClasses, CountsEqualBitSets) {
  const std::vector<FeatureVector> v{{4, {0, 1}}, {4, {0, 1}}, {4, {2}}, {4, {}}};
  const std::vector<std::uint32_t> all{0, 1, 2, 3}, some{0, 1};
  EXPECT_EQ(distinct_classes(v, all), 3u);
  EXPECT_EQ(distinct_classes(v, some), 1u);
}

LshForest stability_forest(std::size_t n, bool duplicates) {
  std::mt19937_64 rng(23);
  const MinHashConfig cfg(128, 4);
  std::vector<MinHashSignature> sigs;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint32_t> bits;
    for (std::uint32_t b = 0; b < 40; ++b) {
      if (rng() % 3 == 0) bits.push_back(b);
    }
    sigs.push_back(minhash(bits, cfg));
    if (duplicates) sigs.push_back(sigs.back());
  }
  return build_forest(std::move(sigs), ForestConfig{16, 10});
}

TEST(Stability, TwentyRowsOfTenNonDecreasing) {
  const auto forest = stability_forest(60, false);
  const auto rows = stability_sample(forest, 20, 10, 5);
  ASSERT_EQ(rows.size(), 20u);
  std::vector<std::uint32_t> ids;
  for (const auto& r : rows) {
    ids.push_back(r.id);
    EXPECT_EQ(r.distances.size(), 10u);
    EXPECT_TRUE(std::is_sorted(r.distances.begin(), r.distances.end()));
    for (double d : r.distances) {
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 1.0);
    }
  }
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::unique(ids.begin(), ids.end()), ids.end());
}

TEST(Stability, SeededAndClamped) {
  const auto forest = stability_forest(12, false);
  const auto a = stability_sample(forest, 20, 10, 5), b = stability_sample(forest, 20, 10, 5);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].distances, b[i].distances);
  }
  const auto c = stability_sample(forest, 5, 3, 6);
  EXPECT_EQ(c.size(), 5u);
  EXPECT_EQ(c[0].distances.size(), 3u);
}

TEST(Stability, DuplicatesHaveZeroNearestDistance) {
  const auto forest = stability_forest(30, true);
  for (const auto& r : stability_sample(forest, 20, 10, 8)) {
    ASSERT_FALSE(r.distances.empty());
    EXPECT_DOUBLE_EQ(r.distances.front(), 0.0);
  }
}

TEST(Stability, CsvRows) {
  const std::vector<StabilityRow> rows{{4, {0.0, 0.5}}, {9, {0.25}}};
  EXPECT_EQ(format_stability_csv(rows), "id,rank,distance\n4,1,0\n4,2,0.5\n9,1,0.25\n");
}

TEST(Verdicts, BadVerdictRule) {
  for (const char* v : {"clean", "Good", " harmless ", "benign", "undetected", "0"}) {
    EXPECT_FALSE(is_bad_verdict(v)) << v;
  }
  for (const char* v : {"malicious", "phishing", "suspicious", "1", "spam"}) {
    EXPECT_TRUE(is_bad_verdict(v)) << v;
  }
}

TEST(Verdicts, ReadCsv) {
  testing::TempDir dir;
  testing::write_text(dir / "v.csv", "domain,verdict\nA.Example,malicious\n# note\nb.example , clean\n");
  const auto v = read_verdicts(dir / "v.csv");
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.at("a.example"), "malicious");
  EXPECT_EQ(v.at("b.example"), "clean");
  testing::write_text(dir / "bad.csv", "a.example\n");
  EXPECT_THROW(read_verdicts(dir / "bad.csv"), Error);
}

void expect_table3(const NeighborhoodAudit& a) {
  EXPECT_EQ(a.total(), 211u);
  EXPECT_EQ(a.good, 32u);
  EXPECT_EQ(a.bad, 166u);
  EXPECT_EQ(a.unknown, 13u);
  EXPECT_EQ(a.distinct_fingerprints, 12u);
  EXPECT_EQ(a.outliers, 0u);
  EXPECT_NEAR(a.percent_bad, 78.67, 0.005);
  ASSERT_TRUE(a.reclassified);
  EXPECT_EQ(*a.reclassified, 27u);
  EXPECT_NEAR(*a.percent_reclassified, 60.0, 1e-9);
  EXPECT_NEAR(*a.percent_confirmed_bad, 91.47, 0.005);
}

TEST(Audit, FirstNeighbourhoodById) {
  const auto f = fixtures::audit_fixture(32, 166, 13, 27, 12);
  const auto audit = neighborhood_audit(f.graph, f.layout, f.nodes, f.selected, &f.verdicts);
  expect_table3(audit);
  const auto text = format_audit_text(audit);
  EXPECT_NE(text.find("Total Nodes: 211"), std::string::npos);
  EXPECT_NE(text.find("Confirmed malicious after reclassification: 91.47%"), std::string::npos);
}

TEST(Audit, FirstNeighbourhoodByRegion) {
  const auto f = fixtures::audit_fixture(32, 166, 13, 27, 12);
  const auto audit = neighborhood_audit(f.graph, f.layout, f.nodes, f.region, &f.verdicts);
  EXPECT_EQ(audit.ids, f.selected);
  expect_table3(audit);
}

TEST(Audit, SecondNeighbourhood) {
  const auto f = fixtures::audit_fixture(25, 30, 30, 40, 9);
  const auto audit = neighborhood_audit(f.graph, f.layout, f.nodes, f.region, &f.verdicts);
  EXPECT_EQ(audit.total(), 85u);
  EXPECT_EQ(audit.distinct_fingerprints, 9u);
  EXPECT_EQ(*audit.reclassified, 40u);
  EXPECT_NEAR(*audit.percent_confirmed_bad, 82.35, 0.005);
  // 40 / 55 = 72.727..., 72.72 when truncated to two places.
  EXPECT_NEAR(*audit.percent_reclassified, 72.72, 0.01);
}

TEST(Audit, WithoutVerdictsHasNoReclassification) {
  const auto f = fixtures::audit_fixture(2, 3, 1, 1, 2);
  const auto audit = neighborhood_audit(f.graph, f.layout, f.nodes, f.selected);
  EXPECT_FALSE(audit.reclassified);
  EXPECT_FALSE(audit.percent_confirmed_bad);
  EXPECT_NEAR(audit.percent_bad, 50.0, 1e-9);
  EXPECT_EQ(format_audit_text(audit).find("Newly identified"), std::string::npos);
}

TEST(Audit, GoodOnlySelection) {
  const auto f = fixtures::audit_fixture(5, 0, 0, 0, 1);
  const auto audit = neighborhood_audit(f.graph, f.layout, f.nodes, f.selected, &f.verdicts);
  EXPECT_EQ(audit.good, 5u);
  EXPECT_DOUBLE_EQ(audit.percent_bad, 0.0);
  EXPECT_DOUBLE_EQ(*audit.percent_confirmed_bad, 0.0);
}

TEST(Audit, WholeLayoutCountsOutliers) {
  const auto f = fixtures::audit_fixture(3, 3, 3, 0, 3);
  const auto audit =
      neighborhood_audit(f.graph, f.layout, f.nodes, Region{-1e9, -1e9, 1e9, 1e9}, &f.verdicts);
  EXPECT_EQ(audit.total(), f.nodes.size());
  EXPECT_EQ(audit.outliers, 10u);
  // The ten far nodes are good with a malicious verdict.
  EXPECT_EQ(*audit.reclassified, 10u);
}

TEST(Audit, SelectionErrors) {
  const auto f = fixtures::audit_fixture(1, 1, 1, 0, 1);
  const auto code = [&](const Selection& s) {
    try {
      neighborhood_audit(f.graph, f.layout, f.nodes, s);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kStage;
  };
  EXPECT_EQ(code(Region{500, 500, 600, 600}), ErrorCode::kEmptySelection);
  EXPECT_EQ(code(std::vector<std::uint32_t>{}), ErrorCode::kEmptySelection);
  EXPECT_EQ(code(std::vector<std::uint32_t>{999}), ErrorCode::kUnknownId);
}

TEST(Audit, DuplicateIdsCountOnce) {
  const auto f = fixtures::audit_fixture(1, 1, 1, 0, 1);
  const auto audit = neighborhood_audit(f.graph, f.layout, f.nodes, std::vector<std::uint32_t>{2, 0, 2});
  EXPECT_EQ(audit.ids, (std::vector<std::uint32_t>{0, 2}));
}

}  // namespace
}  // namespace tlsmap
