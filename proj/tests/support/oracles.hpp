#pragma once

// Independent reference implementations used to compute expected values.
// None of these call into the library under test.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace tlsmap::oracle {

inline double jaccard(const std::set<std::uint32_t>& a, const std::set<std::uint32_t>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (auto x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

inline std::set<std::uint32_t> random_set(std::mt19937_64& rng, std::uint32_t universe,
                                          std::size_t bits) {
  std::set<std::uint32_t> s;
  std::uniform_int_distribution<std::uint32_t> pick(0, universe - 1);
  while (s.size() < bits) s.insert(pick(rng));
  return s;
}

inline std::vector<std::uint32_t> to_vector(const std::set<std::uint32_t>& s) {
  return {s.begin(), s.end()};
}

// Ids of the k sets with the smallest exact Jaccard distance to sets[q],
// excluding q, plus the k-th distance itself (for tie-tolerant recall).
inline std::pair<std::vector<std::uint32_t>, double> exact_top_k(
    const std::vector<std::set<std::uint32_t>>& sets, std::uint32_t q, std::size_t k) {
  std::vector<std::pair<double, std::uint32_t>> d;
  for (std::uint32_t i = 0; i < sets.size(); ++i) {
    if (i != q) d.emplace_back(1.0 - jaccard(sets[q], sets[i]), i);
  }
  std::sort(d.begin(), d.end());
  d.resize(std::min(k, d.size()));
  std::vector<std::uint32_t> ids;
  for (auto& [dist, id] : d) ids.push_back(id);
  return {ids, d.empty() ? 0.0 : d.back().first};
}

// Dense Prim over each component; absent edges are +inf. Weights are summed
// component by component so the result is the minimum spanning forest weight.
inline double prim_forest_weight(std::size_t n, const std::vector<std::vector<double>>& w) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<bool> done(n, false);
  std::vector<double> best(n, kInf);
  double total = 0.0;
  for (std::size_t root = 0; root < n; ++root) {
    if (done[root]) continue;
    best[root] = 0.0;
    while (true) {
      std::size_t u = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (!done[i] && best[i] < kInf && (u == n || best[i] < best[u])) u = i;
      }
      if (u == n) break;
      done[u] = true;
      total += best[u];
      for (std::size_t v = 0; v < n; ++v) {
        if (!done[v] && w[u][v] < best[v]) best[v] = w[u][v];
      }
    }
  }
  return total;
}

struct Mmh3Vector {
  std::string input;
  std::uint32_t seed;
  std::uint32_t expected;
};

// Python mmh3.hash(input, seed, signed=False).
inline const std::vector<Mmh3Vector>& mmh3_vectors() {
  static const std::vector<Mmh3Vector> v = {
      {"", 0, 0u},
      {"", 1, 1364076727u},
      {"", 0xffffffffu, 2180083513u},
      {"a", 0, 1009084850u},
      {"ab", 0, 2613040991u},
      {"abc", 0, 3017643002u},
      {"abcd", 0, 1139631978u},
      {"hello", 0, 613153351u},
      {"hello", 1, 3142237357u},
      {"Hello, world!", 1234, 4210478515u},
      {"The quick brown fox jumps over the lazy dog", 0, 776992547u},
      {"Server: cloudflare\nDate\nContent-Type", 0, 2536124434u},
      {std::string(4, '\0'), 0, 593689054u},
      {std::string(36, 'a'), 2538058380u, 3618111284u},
  };
  return v;
}

struct Sha256Vector {
  std::string input;
  std::string expected;
};

// Python hashlib.sha256(input).hexdigest().
inline const std::vector<Sha256Vector>& sha256_vectors() {
  static const std::vector<Sha256Vector> v = {
      {"", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"},
      {"abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"},
      {"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
       "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1"},
      {std::string(1000, 'a'), "41edece42d63e8d9bf515a9ba6932e1c20cbc9f5a5d134645adb5db1b9737ea3"},
      {"The quick brown fox jumps over the lazy dog",
       "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592"},
      {"hello", "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"},
      {"Server: cloudflare\nDate", "9e46aa12c3ffe4e273060855a58cfa8d578fb5e431c0d2a0faa7ce389596c045"},
      {"abcdefghbcdefghicdefghijdefghijkefghijklfghijklmghijklmnhijklmnoijklmnopjklmnopqklmnopqrlmnopqrsmnopqrstnopqrstu",
       "cf5b16a778af8380036ce59e7b0492370b249b11e8f07a51afac45037afee9d1"},
      {std::string(55, 'x'), "d5e285683cd4efc02d021a5c62014694958901005d6f71e89e0989fac77e4072"},
      {std::string(56, 'x'), "04c26261370ee7541549d16dee320c723e3fd14671e66a099afe0a377c16888e"},
      {std::string(64, 'x'), "7ce100971f64e7001e8fe5a51973ecdfe1ced42befe7ee8d5fd6219506b5393c"},
  };
  return v;
}

// The ten-response example fingerprint, verbatim.
inline const std::string& figure_fingerprint() {
  static const std::string s =
      "771_1302_43.AwQ-51.23_0.-16.AAMCaDI__43.AwQ-51.23_-|"
      "771_c030_0.-1.AQ-16.AAkIaHR0cC8xLjE____|"
      "771_c02f_65281.-0.-11.AwABAg-35.-16.AAMCaDI____|"
      "771_1301_43.AwQ-51.29_0.-10.AAQAFwAd___-|"
      "______<40|"
      "771_1302_43.AwQ-51.23_0.-16.AAMCaDI__43.AwQ-51.23_-|"
      "______<70|"
      "771_c02c_0.-1.AQ-35.-16.AAMCaDI____|"
      "______<40|"
      "771_cca8_0.-16.AAMCaDI____";
  return s;
}

inline constexpr const char* kFigureSha256 =
    "87f80d85132ec9b8a1dcecba851da92aa901ec55aae7a6c215bf7cca4e2e71f8";

}  // namespace tlsmap::oracle
