#include <benchmark/benchmark.h>

#include <random>
#include <set>

#include "tlsmap/http_headers.hpp"
#include "tlsmap/simgraph.hpp"
#include "tlsmap/simindex.hpp"
#include "tlsmap/tls_fingerprint.hpp"

namespace {

using namespace tlsmap;

std::vector<std::vector<std::uint32_t>> random_sets(std::size_t count, std::size_t bits,
                                                    std::uint32_t universe, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::uint32_t>> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::set<std::uint32_t> s;
    while (s.size() < bits) s.insert(static_cast<std::uint32_t>(rng() % universe));
    out.emplace_back(s.begin(), s.end());
  }
  return out;
}

std::vector<MinHashSignature> signatures(std::size_t count, std::size_t d) {
  const MinHashConfig cfg(d, 1);
  std::vector<MinHashSignature> out;
  for (const auto& s : random_sets(count, 30, 2000, 2)) out.push_back(minhash(s, cfg));
  return out;
}

void BM_Minhash(benchmark::State& state) {
  const MinHashConfig cfg(1024, 1);
  const auto sets = random_sets(64, static_cast<std::size_t>(state.range(0)), 5000, 3);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(minhash(sets[i++ % sets.size()], cfg));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Minhash)->Arg(30)->Arg(100)->Arg(850);

void BM_EstimateDistance(benchmark::State& state) {
  const auto sigs = signatures(2, 1024);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_distance(sigs[0], sigs[1]));
}
BENCHMARK(BM_EstimateDistance);

void BM_ForestBuild(benchmark::State& state) {
  const auto sigs = signatures(static_cast<std::size_t>(state.range(0)), 1024);
  for (auto _ : state) benchmark::DoNotOptimize(build_forest(sigs, ForestConfig{128, 10}));
}
BENCHMARK(BM_ForestBuild)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_ForestQuery(benchmark::State& state) {
  const auto forest = build_forest(signatures(5000, 1024), ForestConfig{128, 10});
  const auto k = static_cast<std::size_t>(state.range(0));
  std::uint32_t id = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forest.query(id, k));
    id = (id + 1) % 5000;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ForestQuery)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_Kruskal(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::vector<Edge> edges;
  for (std::uint32_t u = 0; u < n; ++u) {
    for (int j = 0; j < 20; ++j) {
      const auto v = static_cast<std::uint32_t>(rng() % n);
      edges.push_back({u, v, static_cast<double>(rng() % 1024) / 1024.0});
    }
  }
  const auto graph = make_graph(n, edges);
  for (auto _ : state) benchmark::DoNotOptimize(kruskal_msf(graph));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(graph.edges.size()));
}
BENCHMARK(BM_Kruskal)->Arg(1000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_Mmh3(benchmark::State& state) {
  const std::string text(static_cast<std::size_t>(state.range(0)), 'x');
  for (auto _ : state) benchmark::DoNotOptimize(mmh3_32(text));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Mmh3)->Arg(16)->Arg(256)->Arg(4096);

void BM_ParseRaw(benchmark::State& state) {
  const std::string raw =
      "771_1302_43.AwQ-51.23__-|771_c030_-__-|771_c02f_0.-1.AQ-16.AAkIaHR0cC8xLjE__-|"
      "771_1301_65281.-0.-11.AwABAg-35.-16.AAMCaDI__-|______<40|771_c02c_43.AwQ-51.29__-|"
      "______<70|771_cca8_0.-1.AQ-35.-16.AAMCaDI_0.-16.AAMCaDI_-|______<40|"
      "771_1301_0.-16.AAMCaDI_0.-10.AAQAFwAd_-";
  for (auto _ : state) benchmark::DoNotOptimize(parse_raw(raw));
}
BENCHMARK(BM_ParseRaw);

}  // namespace

BENCHMARK_MAIN();
