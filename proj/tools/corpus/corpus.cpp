#include "corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace tlsmap::corpus {

namespace {

constexpr std::size_t kSegments = 10;
constexpr const char* kFetchedAt = "2024-01-01T00:00:00Z";

const std::vector<std::string> kCiphers = {
    "1301", "1302", "1303", "c02b", "c02c", "c02f", "c030", "cca8",
    "cca9", "c013", "c014", "009c", "009d", "002f", "0035", "c009",
    "c00a", "009e", "009f", "ccaa", "c023", "c024", "c027", "c028"};
const std::vector<std::string> kVersions = {"771", "772", "770"};
const std::vector<std::string> kAlerts = {"40", "70", "47", "80", "112"};

std::string pick(std::mt19937_64& rng, const std::vector<std::string>& pool) {
  return pool[rng() % pool.size()];
}

std::string alnum(std::mt19937_64& rng, std::size_t n) {
  static constexpr char kChars[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += kChars[rng() % (sizeof(kChars) - 1)];
  return s;
}

std::string extension_group(std::mt19937_64& rng) {
  std::string g;
  const auto n = 1 + rng() % 4;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) g += '-';
    g += std::to_string(rng() % 65536) + "." + alnum(rng, 2 + rng() % 6);
  }
  return g;
}

std::vector<std::string> split_fields(const std::string& segment) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = segment.find('_', start);
    out.push_back(segment.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join_fields(const std::vector<std::string>& fields) {
  std::string s;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) s += '_';
    s += fields[i];
  }
  return s;
}

HeaderCapture capture(const std::string& domain, std::vector<std::string> keys,
                      std::string server) {
  HeaderCapture c;
  c.domain = domain;
  c.status = FetchStatus::ok();
  c.keys = std::move(keys);
  c.server_value = std::move(server);
  c.fetched_at = kFetchedAt;
  return c;
}

}  // namespace

std::string ServerConfig::raw() const {
  std::string s;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) s += '|';
    s += segments[i];
  }
  return s;
}

ServerConfig random_config(std::mt19937_64& rng) {
  ServerConfig c;
  // Servers tend to answer with a few distinct handshakes, repeated.
  std::vector<std::string> shapes;
  const auto distinct = 2 + rng() % 3;
  for (std::size_t i = 0; i < distinct; ++i) {
    std::vector<std::string> f = {pick(rng, kVersions), pick(rng, kCiphers), extension_group(rng),
                                  rng() % 2 ? extension_group(rng) : "",
                                  rng() % 3 == 0 ? extension_group(rng) : "", "", "-"};
    shapes.push_back(join_fields(f));
  }
  for (std::size_t i = 0; i < kSegments; ++i) {
    if (rng() % 5 == 0) {
      c.segments.push_back("______<" + pick(rng, kAlerts));
    } else {
      c.segments.push_back(shapes[i < shapes.size() ? i : rng() % shapes.size()]);
    }
  }
  return c;
}

ServerConfig with_cipher_change(const ServerConfig& base, const std::string& cipher) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : base.segments) {
    const auto f = split_fields(s);
    if (!f[0].empty()) ++counts[f[1]];
  }
  ServerConfig out = base;
  for (auto& s : out.segments) {
    auto f = split_fields(s);
    if (!f[0].empty() && counts[f[1]] >= 2) {
      f[1] = cipher;
      s = join_fields(f);
      return out;
    }
  }
  throw std::runtime_error("no repeated cipher to replace");
}

std::string fresh_cipher(std::mt19937_64& rng, const std::vector<std::string>& avoid) {
  static constexpr char kHex[] = "0123456789abcdef";
  while (true) {
    std::string c = "f";
    for (int i = 0; i < 3; ++i) c += kHex[rng() % 16];
    if (std::find(avoid.begin(), avoid.end(), c) == avoid.end()) return c;
  }
}

Corpus planted_families(const PlantedSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::vector<std::string> used;
  const auto member_config = [&](const ServerConfig& family) {
    // One member-specific cipher keeps family members near but not identical.
    auto c = fresh_cipher(rng, used);
    used.push_back(c);
    return with_cipher_change(family, c);
  };
  const auto base_config = [&] {
    while (true) {
      auto c = random_config(rng);
      try {
        // Members and clones each need one repeated cipher to replace.
        (void)with_cipher_change(with_cipher_change(c, "0000"), "0001");
        return c;
      } catch (const std::runtime_error&) {
      }
    }
  };

  Corpus corpus;
  const auto a_base = base_config();
  const auto b_base = base_config();
  std::vector<ServerConfig> a_members;
  for (std::size_t i = 0; i < spec.family_size; ++i) a_members.push_back(member_config(a_base));

  const std::vector<std::string> a_keys = {"Server", "Date", "Content-Type", "Content-Length",
                                           "Connection", "X-Powered-By"};
  const std::vector<std::vector<std::string>> b_keys = {
      {"Date", "Content-Type", "Transfer-Encoding", "Connection", "Server", "Vary"},
      {"Content-Type", "Date", "Server", "Cache-Control", "Strict-Transport-Security"},
      {"Server", "Date", "Content-Type", "Connection", "Set-Cookie", "Alt-Svc"}};

  for (std::size_t i = 0; i < spec.family_size; ++i) {
    CorpusDomain d;
    d.domain = "a" + std::to_string(i) + ".shop-deals.example";
    d.ip = "10.1.0." + std::to_string(i + 1);
    d.source = "blocklist";
    d.label = Label::kBad;
    d.family = "A";
    d.raw_fingerprint = a_members[i].raw();
    d.capture = capture(d.domain, a_keys, "nginx/1.18.0");
    corpus.domains.push_back(std::move(d));
  }
  for (std::size_t i = 0; i < spec.family_size; ++i) {
    CorpusDomain d;
    d.domain = "b" + std::to_string(i) + ".news-portal.example";
    d.ip = "10.2.0." + std::to_string(i + 1);
    d.source = "toplist";
    d.label = Label::kGood;
    d.family = "B";
    d.raw_fingerprint = b_base.raw();
    d.capture = capture(d.domain, b_keys[i % b_keys.size()], "cloudflare");
    corpus.domains.push_back(std::move(d));
  }
  for (std::size_t i = 0; i < spec.family_size; ++i) {
    auto c = fresh_cipher(rng, used);
    used.push_back(c);
    CorpusDomain d;
    d.domain = "c" + std::to_string(i) + ".login-verify.example";
    d.ip = "10.3.0." + std::to_string(i + 1);
    d.source = "newly_registered";
    d.label = Label::kUnknown;
    d.family = "C";
    d.raw_fingerprint = with_cipher_change(a_members[i], c).raw();
    d.capture = capture(d.domain, a_keys, "nginx/1.18.0");
    corpus.domains.push_back(std::move(d));
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto bad = open("bad.csv");
    auto good = open("good.csv");
    auto unknown = open("unknown.csv");
    for (auto* f : {&bad, &good, &unknown}) *f << "domain,ip\n";
    for (const auto& d : corpus.domains) {
      auto& f = d.label == Label::kBad ? bad : d.label == Label::kGood ? good : unknown;
      f << d.domain << ',' << d.ip << '\n';
    }
  }
  {
    auto scan = open("scan.jsonl");
    for (const auto& d : corpus.domains) {
      scan << nlohmann::ordered_json{{"domain", d.domain}, {"raw_fingerprint", d.raw_fingerprint}}.dump()
           << '\n';
    }
    std::vector<HeaderCapture> captures;
    for (const auto& d : corpus.domains) captures.push_back(d.capture);
    write_captures(dir / "captures.jsonl", captures);
  }
  {
    auto asn = open("asn.dat");
    asn << "; prefix\tasn\n10.1.0.0/16\t64501\n10.2.0.0/16\t13335\n10.3.0.0/16\t64502\n";
  }
  {
    auto ini = open("pipeline.ini");
    ini << "[pipeline]\nseed = 42\n\n"
        << "[ingest]\n"
        << "list = bad.csv,blocklist,bad\n"
        << "list = good.csv,toplist,good\n"
        << "list = unknown.csv,newly_registered,unknown\n"
        << "asn_db = asn.dat\n\n"
        << "[parse]\nscan = scan.jsonl\n\n"
        << "[headers]\nmode = offline\noffline = captures.jsonl\n\n"
        << "[features]\nheader_mode = hash_only\n";
  }
}

}  // namespace tlsmap::corpus
