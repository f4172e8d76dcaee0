#include "tlsmap/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "tlsmap/error.hpp"
#include "tlsmap/query.hpp"
#include "tlsmap/random.hpp"

namespace tlsmap {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using detail::trim;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "pipeline.seed",
      "pipeline.out_dir",
      "ingest.list",
      "ingest.asn_db",
      "ingest.seed",
      "parse.scan",
      "parse.domain_column",
      "parse.fingerprint_column",
      "headers.mode",
      "headers.offline",
      "headers.timeout_secs",
      "headers.concurrency",
      "headers.user_agent",
      "headers.allow_http_fallback",
      "headers.https_proxy",
      "features.header_mode",
      "index.num_hashes",
      "index.num_trees",
      "index.candidate_factor",
      "index.seed",
      "graph.k",
      "layout.seed",
      "layout.iterations",
      "render.name",
      "render.good_color",
      "render.bad_color",
      "render.unknown_color",
      "render.point_size",
      "render.tooltip_fields",
      "render.title",
      "stats.stability_sample_size",
      "stats.stability_k",
      "stats.seed",
      "stats.audit_ids",
      "stats.audit_region",
      "stats.verdicts",
  };
  return keys;
}

template <typename Int>
Int config_int(const std::string& key, const std::string& value) {
  auto parsed = detail::parse_int<Int>(value);
  if (!parsed) throw Error(ErrorCode::kConfig, key + ": expected an integer, got '" + value + "'");
  return *parsed;
}

bool config_bool(const std::string& key, const std::string& value) {
  const auto v = detail::to_lower(trim(value));
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw Error(ErrorCode::kConfig, key + ": expected a boolean, got '" + value + "'");
}

fs::path resolve(const fs::path& base, std::string_view text) {
  fs::path p{std::string(trim(text))};
  return p.is_absolute() || base.empty() ? p : base / p;
}

HeaderSource parse_header_source(std::string_view text) {
  const auto v = detail::to_lower(trim(text));
  if (v == "online") return HeaderSource::kOnline;
  if (v == "offline") return HeaderSource::kOffline;
  if (v == "skip") return HeaderSource::kSkip;
  throw Error(ErrorCode::kConfig, "headers.mode: expected online, offline or skip");
}

std::string_view to_string(HeaderSource source) {
  switch (source) {
    case HeaderSource::kOnline: return "online";
    case HeaderSource::kOffline: return "offline";
    case HeaderSource::kSkip: return "skip";
  }
  return "online";
}

}  // namespace

Region parse_region(std::string_view text) {
  const auto parts = detail::split(text, ',');
  if (parts.size() != 4) {
    throw Error(ErrorCode::kConfig, "region: expected x_min,y_min,x_max,y_max");
  }
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    auto d = detail::parse_double(parts[i]);
    if (!d) throw Error(ErrorCode::kConfig, "region: bad number '" + std::string(parts[i]) + "'");
    v[i] = *d;
  }
  if (v[0] > v[2] || v[1] > v[3]) {
    throw Error(ErrorCode::kConfig, "region: min corner exceeds max corner");
  }
  return Region{v[0], v[1], v[2], v[3]};
}

std::vector<std::uint32_t> parse_id_list(std::string_view text) {
  std::vector<std::uint32_t> ids;
  for (auto part : detail::split(text, ',')) {
    if (trim(part).empty()) continue;
    auto id = detail::parse_int<std::uint32_t>(part);
    if (!id) throw Error(ErrorCode::kConfig, "id list: bad id '" + std::string(part) + "'");
    ids.push_back(*id);
  }
  return ids;
}

DomainList parse_domain_list(std::string_view text, const fs::path& base_dir) {
  const auto parts = detail::split(text, ',');
  if (parts.size() != 3) {
    throw Error(ErrorCode::kConfig, "domain list: expected path,source,label");
  }
  DomainList list;
  list.path = resolve(base_dir, parts[0]);
  list.source = std::string(trim(parts[1]));
  if (list.source.empty()) throw Error(ErrorCode::kConfig, "domain list: empty source");
  try {
    list.label = parse_label(parts[2]);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("domain list: ") + e.what());
  }
  return list;
}

PipelineConfig PipelineConfig::from_ini(const IniFile& ini, const fs::path& base_dir) {
  for (const auto& key : ini.keys()) {
    if (!known_keys().contains(key)) throw Error(ErrorCode::kConfig, "unknown key " + key);
  }
  PipelineConfig c;
  auto with = [&](const char* section, const char* key, auto&& fn) {
    if (const auto* v = ini.get(section, key)) fn(std::string(section) + "." + key, *v);
  };
  using S = const std::string&;

  with("pipeline", "seed", [&](S k, S v) { c.seed = config_int<std::uint64_t>(k, v); });
  with("pipeline", "out_dir", [&](S, S v) { c.out_dir = resolve(base_dir, v); });

  for (const auto& v : ini.get_all("ingest", "list")) c.lists.push_back(parse_domain_list(v, base_dir));
  with("ingest", "asn_db", [&](S, S v) { c.asn_db = resolve(base_dir, v); });
  with("ingest", "seed", [&](S k, S v) { c.ingest_seed = config_int<std::uint64_t>(k, v); });

  with("parse", "scan", [&](S, S v) { c.scan = resolve(base_dir, v); });
  with("parse", "domain_column", [&](S, S v) { c.scan_columns.domain = v; });
  with("parse", "fingerprint_column", [&](S, S v) { c.scan_columns.fingerprint = v; });

  with("headers", "mode", [&](S, S v) { c.header_source = parse_header_source(v); });
  with("headers", "offline", [&](S, S v) {
    c.offline_captures = resolve(base_dir, v);
    if (!ini.get("headers", "mode")) c.header_source = HeaderSource::kOffline;
  });
  with("headers", "timeout_secs", [&](S k, S v) {
    c.fetch.timeout = std::chrono::seconds(config_int<std::uint32_t>(k, v));
  });
  with("headers", "concurrency", [&](S k, S v) {
    c.fetch.concurrency = config_int<std::size_t>(k, v);
    if (c.fetch.concurrency == 0) throw Error(ErrorCode::kConfig, k + ": must be positive");
  });
  with("headers", "user_agent", [&](S, S v) { c.fetch.user_agent = v; });
  with("headers", "allow_http_fallback", [&](S k, S v) { c.fetch.allow_http_fallback = config_bool(k, v); });
  with("headers", "https_proxy", [&](S, S v) {
    if (v.empty()) {
      c.fetch.https_proxy.reset();
    } else {
      c.fetch.https_proxy = v;
    }
  });

  with("features", "header_mode", [&](S k, S v) {
    try {
      c.header_mode = parse_header_mode(v);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, k + ": " + e.what());
    }
  });

  with("index", "num_hashes", [&](S k, S v) { c.num_hashes = config_int<std::size_t>(k, v); });
  with("index", "num_trees", [&](S k, S v) { c.num_trees = config_int<std::size_t>(k, v); });
  with("index", "candidate_factor", [&](S k, S v) { c.candidate_factor = config_int<std::size_t>(k, v); });
  with("index", "seed", [&](S k, S v) { c.index_seed = config_int<std::uint64_t>(k, v); });

  with("graph", "k", [&](S k, S v) { c.k = config_int<std::size_t>(k, v); });

  with("layout", "seed", [&](S k, S v) { c.layout_seed = config_int<std::uint64_t>(k, v); });
  with("layout", "iterations", [&](S k, S v) { c.layout_iterations = config_int<std::size_t>(k, v); });

  with("render", "name", [&](S, S v) { c.map_name = v; });
  with("render", "good_color", [&](S, S v) { c.render.good_color = v; });
  with("render", "bad_color", [&](S, S v) { c.render.bad_color = v; });
  with("render", "unknown_color", [&](S, S v) { c.render.unknown_color = v; });
  with("render", "point_size", [&](S k, S v) {
    auto d = detail::parse_double(v);
    if (!d || *d <= 0) throw Error(ErrorCode::kConfig, k + ": expected a positive number");
    c.render.point_size = *d;
  });
  with("render", "tooltip_fields", [&](S k, S v) {
    c.render.tooltip_fields.clear();
    for (auto part : detail::split(v, ',')) {
      if (trim(part).empty()) continue;
      try {
        c.render.tooltip_fields.push_back(parse_tooltip_field(trim(part)));
      } catch (const Error& e) {
        throw Error(ErrorCode::kConfig, k + ": " + e.what());
      }
    }
  });
  with("render", "title", [&](S, S v) { c.render.title = v; });

  with("stats", "stability_sample_size", [&](S k, S v) { c.stability_sample_size = config_int<std::size_t>(k, v); });
  with("stats", "stability_k", [&](S k, S v) { c.stability_k = config_int<std::size_t>(k, v); });
  with("stats", "seed", [&](S k, S v) { c.stats_seed = config_int<std::uint64_t>(k, v); });
  with("stats", "audit_ids", [&](S, S v) { c.audit_selection = parse_id_list(v); });
  with("stats", "audit_region", [&](S, S v) {
    if (ini.get("stats", "audit_ids")) {
      throw Error(ErrorCode::kConfig, "stats: audit_ids and audit_region are exclusive");
    }
    c.audit_selection = parse_region(v);
  });
  with("stats", "verdicts", [&](S, S v) { c.verdicts = resolve(base_dir, v); });

  c.render.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  return from_ini(IniFile::load(path), path.parent_path());
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kIngest: return "ingest";
    case Stage::kParse: return "parse";
    case Stage::kHeaders: return "headers";
    case Stage::kVectorize: return "vectorize";
    case Stage::kIndex: return "index";
    case Stage::kGraph: return "graph";
    case Stage::kLayout: return "layout";
    case Stage::kRender: return "render";
    case Stage::kStats: return "stats";
  }
  return "unknown";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {
      Stage::kIngest, Stage::kParse,  Stage::kHeaders, Stage::kVectorize, Stage::kIndex,
      Stage::kGraph,  Stage::kLayout, Stage::kRender,  Stage::kStats};
  return stages;
}

Stage parse_stage(std::string_view name) {
  for (Stage s : all_stages()) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::kConfig, "unknown stage '" + std::string(name) + "'");
}

// ---- stage files -----------------------------------------------------------

void write_nodes(const fs::path& path, const std::vector<NodeRecord>& nodes) {
  std::string out;
  for (const auto& n : nodes) {
    ordered_json j;
    j["domain"] = n.info.domain;
    j["ip"] = n.info.ip;
    j["source"] = n.info.source;
    j["label"] = to_int(n.info.label);
    j["asn"] = n.info.asn ? ordered_json(*n.info.asn) : ordered_json(nullptr);
    j["sha256_id"] = n.info.sha256_id;
    j["raw_fingerprint"] = n.raw_fingerprint;
    out += j.dump();
    out += '\n';
  }
  detail::write_file(path, out);
}

std::vector<NodeRecord> read_nodes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<NodeRecord> nodes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      NodeRecord n;
      n.info.domain = j.at("domain").get<std::string>();
      n.info.ip = j.at("ip").get<std::string>();
      n.info.source = j.at("source").get<std::string>();
      n.info.label = label_from_int(j.at("label").get<int>());
      if (!j.at("asn").is_null()) n.info.asn = j.at("asn").get<std::uint32_t>();
      n.info.sha256_id = j.at("sha256_id").get<std::string>();
      n.raw_fingerprint = j.at("raw_fingerprint").get<std::string>();
      nodes.push_back(std::move(n));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return nodes;
}

void write_header_records(const fs::path& path, std::span<const HeaderRecord> records) {
  std::string out;
  for (const auto& r : records) {
    ordered_json j;
    j["id"] = r.id;
    j["status"] = r.status ? ordered_json(r.status->to_string()) : ordered_json(nullptr);
    j["hdrhash"] = r.fingerprint ? ordered_json(r.fingerprint->hash) : ordered_json(nullptr);
    j["canonical"] = r.fingerprint ? ordered_json(r.fingerprint->canonical) : ordered_json(nullptr);
    j["server_value"] = r.server_value ? ordered_json(*r.server_value) : ordered_json(nullptr);
    j["keys"] = r.keys;
    out += j.dump();
    out += '\n';
  }
  detail::write_file(path, out);
}

std::vector<HeaderRecord> read_header_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<HeaderRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      HeaderRecord r;
      r.id = j.at("id").get<std::uint32_t>();
      if (!j.at("status").is_null()) r.status = FetchStatus::parse(j.at("status").get<std::string>());
      if (!j.at("hdrhash").is_null()) {
        r.fingerprint = HeaderFingerprint{j.at("canonical").get<std::string>(),
                                          j.at("hdrhash").get<std::uint32_t>()};
      }
      if (!j.at("server_value").is_null()) r.server_value = j.at("server_value").get<std::string>();
      r.keys = j.at("keys").get<std::vector<std::string>>();
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormat, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<NodeInfo> load_node_info(const fs::path& out_dir) {
  auto records = read_nodes(out_dir / files::kNodes);
  std::vector<NodeInfo> nodes;
  nodes.reserve(records.size());
  for (auto& r : records) nodes.push_back(std::move(r.info));
  const auto header_path = out_dir / files::kHeaderFingerprints;
  if (fs::exists(header_path)) {
    for (const auto& h : read_header_records(header_path)) {
      if (h.id >= nodes.size()) {
        throw Error(ErrorCode::kAlignment, "header record id " + std::to_string(h.id) + " out of range");
      }
      if (h.fingerprint) nodes[h.id].hdrhash = h.fingerprint->hash;
    }
  }
  return nodes;
}

Artifacts load_artifacts(const fs::path& out_dir, const ForestConfig& forest) {
  Artifacts a;
  a.nodes = load_node_info(out_dir);
  auto signatures = read_signatures(out_dir / files::kSignatures);
  if (signatures.size() != a.nodes.size()) {
    throw Error(ErrorCode::kAlignment, "signature count does not match node count");
  }
  a.forest = build_forest(std::move(signatures), forest);
  a.graph = make_graph(a.nodes.size(), read_edges_csv(out_dir / files::kEdges));
  return a;
}

// ---- orchestration ---------------------------------------------------------

namespace {

ordered_json read_manifest(const fs::path& path) {
  if (!fs::exists(path)) return ordered_json::object();
  try {
    auto j = ordered_json::parse(detail::read_file(path));
    if (j.is_object()) return j;
  } catch (const nlohmann::json::exception&) {
  }
  // A corrupt manifest only costs a full re-run.
  return ordered_json::object();
}

ordered_json global_parameters(const PipelineConfig& c) {
  ordered_json p;
  p["num_hashes"] = c.num_hashes;
  p["num_trees"] = c.num_trees;
  p["k"] = c.k;
  p["candidate_factor"] = c.candidate_factor;
  p["header_mode"] = std::string(to_string(c.header_mode));
  p["header_source"] = std::string(to_string(c.header_source));
  p["layout_iterations"] = c.layout_iterations;
  p["stability_sample_size"] = c.stability_sample_size;
  p["stability_k"] = c.stability_k;
  return p;
}

ordered_json seeds(const PipelineConfig& c) {
  ordered_json s;
  s["master"] = c.seed;
  s["ingest"] = c.effective_ingest_seed();
  s["index"] = c.effective_index_seed();
  s["layout"] = c.effective_layout_seed();
  s["stats"] = c.effective_stats_seed();
  return s;
}

std::vector<std::string> note_list(std::initializer_list<std::string> items) { return items; }

}  // namespace

Pipeline::Pipeline(PipelineConfig config, fs::path out_dir)
    : config_(std::move(config)), out_dir_(std::move(out_dir)) {}

Pipeline::StageIo Pipeline::stage_io(Stage stage) const {
  const auto at = [&](const char* name) { return out_dir_ / name; };
  StageIo io;
  switch (stage) {
    case Stage::kIngest:
      for (const auto& l : config_.lists) io.inputs.push_back(l.path);
      if (config_.asn_db) io.inputs.push_back(*config_.asn_db);
      io.outputs = {files::kRecords, files::kIngestReport};
      break;
    case Stage::kParse:
      io.inputs = {at(files::kRecords)};
      if (config_.scan) io.inputs.push_back(*config_.scan);
      io.outputs = {files::kNodes, files::kParseReport};
      break;
    case Stage::kHeaders:
      io.inputs = {at(files::kNodes)};
      if (config_.header_source == HeaderSource::kOffline && config_.offline_captures) {
        io.inputs.push_back(*config_.offline_captures);
      }
      io.outputs = {files::kCaptures, files::kHeaderFingerprints};
      break;
    case Stage::kVectorize:
      io.inputs = {at(files::kNodes), at(files::kHeaderFingerprints)};
      io.outputs = {files::kVocabulary, files::kVectors, files::kVocabularyTls, files::kVectorsTls};
      break;
    case Stage::kIndex:
      io.inputs = {at(files::kVocabulary), at(files::kVectors)};
      io.outputs = {files::kSignatures};
      break;
    case Stage::kGraph:
      io.inputs = {at(files::kSignatures)};
      io.outputs = {files::kEdges, files::kMst};
      break;
    case Stage::kLayout:
      io.inputs = {at(files::kNodes), at(files::kMst)};
      io.outputs = {files::kLayout};
      break;
    case Stage::kRender: {
      io.inputs = {at(files::kNodes), at(files::kHeaderFingerprints), at(files::kEdges),
                   at(files::kMst), at(files::kLayout)};
      const auto& n = config_.map_name;
      io.outputs = {n + ".html", n + ".graphml", n + ".nodes.csv", n + ".edges.csv"};
      break;
    }
    case Stage::kStats:
      io.inputs = {at(files::kNodes),      at(files::kHeaderFingerprints), at(files::kVocabulary),
                   at(files::kVectors),    at(files::kVocabularyTls),      at(files::kVectorsTls),
                   at(files::kSignatures), at(files::kEdges),              at(files::kMst),
                   at(files::kLayout)};
      if (config_.verdicts) io.inputs.push_back(*config_.verdicts);
      io.outputs = {files::kGranularityCsv, files::kGranularityTxt, files::kStability,
                    files::kOutliers};
      if (config_.audit_selection) io.outputs.push_back(files::kAudit);
      break;
  }
  return io;
}

std::string Pipeline::stage_params(Stage stage) const {
  const auto& c = config_;
  ordered_json p = ordered_json::object();
  switch (stage) {
    case Stage::kIngest: {
      ordered_json lists = ordered_json::array();
      for (const auto& l : c.lists) {
        lists.push_back({{"path", l.path.string()}, {"source", l.source}, {"label", to_int(l.label)}});
      }
      p["lists"] = lists;
      p["seed"] = c.effective_ingest_seed();
      break;
    }
    case Stage::kParse:
      p["domain_column"] = c.scan_columns.domain;
      p["fingerprint_column"] = c.scan_columns.fingerprint;
      break;
    case Stage::kHeaders:
      p["source"] = std::string(to_string(c.header_source));
      if (c.header_source == HeaderSource::kOnline) {
        p["timeout_ms"] = c.fetch.timeout.count();
        p["user_agent"] = c.fetch.user_agent;
        p["allow_http_fallback"] = c.fetch.allow_http_fallback;
      }
      break;
    case Stage::kVectorize:
      p["header_mode"] = std::string(to_string(c.header_mode));
      break;
    case Stage::kIndex:
      p["num_hashes"] = c.num_hashes;
      p["seed"] = c.effective_index_seed();
      break;
    case Stage::kGraph:
      p["num_trees"] = c.num_trees;
      p["candidate_factor"] = c.candidate_factor;
      p["k"] = c.k;
      break;
    case Stage::kLayout:
      p["seed"] = c.effective_layout_seed();
      p["iterations"] = c.layout_iterations;
      break;
    case Stage::kRender: {
      p["name"] = c.map_name;
      p["colors"] = {c.render.good_color, c.render.bad_color, c.render.unknown_color};
      p["point_size"] = c.render.point_size;
      ordered_json fields = ordered_json::array();
      for (auto f : c.render.tooltip_fields) fields.push_back(std::string(to_string(f)));
      p["tooltip_fields"] = fields;
      p["title"] = c.render.title;
      break;
    }
    case Stage::kStats:
      p["stability_sample_size"] = c.stability_sample_size;
      p["stability_k"] = c.stability_k;
      p["seed"] = c.effective_stats_seed();
      p["num_trees"] = c.num_trees;
      p["candidate_factor"] = c.candidate_factor;
      if (c.audit_selection) {
        if (const auto* ids = std::get_if<std::vector<std::uint32_t>>(&*c.audit_selection)) {
          p["audit_ids"] = *ids;
        } else {
          const auto& r = std::get<Region>(*c.audit_selection);
          p["audit_region"] = {r.x_min, r.y_min, r.x_max, r.y_max};
        }
      }
      break;
  }
  return p.dump();
}

StageOutcome Pipeline::run_stage(Stage stage) {
  const std::string name(to_string(stage));
  const auto manifest_path = out_dir_ / files::kManifest;
  StageOutcome outcome{stage, false, {}};
  try {
    fs::create_directories(out_dir_);
    const auto io = stage_io(stage);
    const auto params = stage_params(stage);

    ordered_json inputs = ordered_json::object();
    for (const auto& in : io.inputs) {
      if (!fs::exists(in)) throw Error(ErrorCode::kIo, "missing input " + in.string());
      const auto key = in.parent_path() == out_dir_ ? in.filename().string() : in.string();
      inputs[key] = sha256_file_hex(in);
    }

    auto manifest = read_manifest(manifest_path);
    if (manifest.contains("stages") && manifest["stages"].contains(name)) {
      const auto& prev = manifest["stages"][name];
      bool same = prev.value("params", std::string{}) == params && prev.contains("inputs") &&
                  prev["inputs"] == inputs && prev.contains("outputs") &&
                  prev["outputs"].size() == io.outputs.size();
      for (std::size_t i = 0; same && i < io.outputs.size(); ++i) {
        const auto path = out_dir_ / io.outputs[i];
        same = prev["outputs"].contains(io.outputs[i]) && fs::exists(path) &&
               prev["outputs"][io.outputs[i]] == sha256_file_hex(path);
      }
      if (same) {
        outcome.skipped = true;
        return outcome;
      }
    }

    const auto started = utc_timestamp();
    outcome.notes = execute(stage);

    ordered_json outputs = ordered_json::object();
    for (const auto& out : io.outputs) {
      const auto path = out_dir_ / out;
      if (!fs::exists(path)) throw Error(ErrorCode::kIo, "stage did not produce " + out);
      outputs[out] = sha256_file_hex(path);
    }

    if (!manifest.contains("created_at")) manifest["created_at"] = started;
    manifest["tool_version"] = kToolVersion;
    manifest["updated_at"] = utc_timestamp();
    manifest["parameters"] = global_parameters(config_);
    manifest["seeds"] = seeds(config_);
    if (!manifest.contains("stages")) manifest["stages"] = ordered_json::object();
    ordered_json entry;
    entry["params"] = params;
    entry["inputs"] = inputs;
    entry["outputs"] = outputs;
    entry["started_at"] = started;
    entry["finished_at"] = utc_timestamp();
    manifest["stages"][name] = entry;
    detail::write_file(manifest_path, manifest.dump(2) + "\n");
    return outcome;
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.code(), e.what());
  } catch (const fs::filesystem_error& e) {
    throw StageError(name, ErrorCode::kIo, e.what());
  }
}

std::vector<StageOutcome> Pipeline::run_all() {
  std::vector<StageOutcome> outcomes;
  for (Stage s : all_stages()) outcomes.push_back(run_stage(s));
  return outcomes;
}

std::vector<std::string> Pipeline::execute(Stage stage) {
  const auto& c = config_;
  const auto at = [&](const char* name) { return out_dir_ / name; };

  switch (stage) {
    case Stage::kIngest: {
      if (c.lists.empty()) throw Error(ErrorCode::kConfig, "no domain lists configured");
      std::vector<DomainRecord> records;
      std::size_t unresolved = 0;
      std::string report;
      for (std::size_t i = 0; i < c.lists.size(); ++i) {
        const auto& l = c.lists[i];
        auto loaded = load_domains(l.path, l.source, l.label, c.effective_ingest_seed() + i);
        unresolved += loaded.unresolved;
        report += l.path.filename().string() + "\t" + l.source + "\t" +
                  std::string(to_string(l.label)) + "\trecords=" +
                  std::to_string(loaded.records.size()) + "\tunresolved=" +
                  std::to_string(loaded.unresolved) + "\n";
        for (auto& r : loaded.records) records.push_back(std::move(r));
      }
      seeded_shuffle(std::span<DomainRecord>(records), c.effective_ingest_seed());
      std::size_t with_asn = 0;
      if (c.asn_db) {
        const auto db = load_asn_db(*c.asn_db);
        enrich_asn(records, db);
        for (const auto& r : records) with_asn += r.asn.has_value();
        report += "asn_db\tentries=" + std::to_string(db.size()) +
                  "\tskipped_lines=" + std::to_string(db.skipped_lines()) + "\n";
      }
      report += "total\trecords=" + std::to_string(records.size()) +
                "\tunresolved=" + std::to_string(unresolved) +
                "\twith_asn=" + std::to_string(with_asn) + "\n";
      write_records(at(files::kRecords), records);
      detail::write_file(at(files::kIngestReport), report);
      return note_list({std::to_string(records.size()) + " records, " +
                        std::to_string(unresolved) + " unresolved"});
    }

    case Stage::kParse: {
      if (!c.scan) throw Error(ErrorCode::kConfig, "parse.scan is not configured");
      const auto records = read_records(at(files::kRecords));
      const auto rows = load_scan_output(*c.scan, c.scan_columns);
      std::unordered_map<std::string, std::vector<std::size_t>> by_domain;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        by_domain[normalize_domain(rows[i].domain)].push_back(i);
      }
      std::unordered_map<std::string, std::size_t> used;
      std::vector<NodeRecord> nodes;
      std::size_t unresolved = 0, unscanned = 0;
      std::string report;
      for (const auto& r : records) {
        if (!r.resolved()) {
          ++unresolved;
          continue;
        }
        auto it = by_domain.find(r.domain);
        if (it == by_domain.end()) {
          ++unscanned;
          report += "unscanned\t" + r.domain + "\n";
          continue;
        }
        // Repeated rows pair with repeated records in order; extra records reuse the last row.
        auto& next = used[r.domain];
        const auto row = it->second[std::min(next, it->second.size() - 1)];
        ++next;
        TlsFingerprint fp;
        try {
          fp = parse_raw(rows[row].raw_fingerprint);
        } catch (const Error& e) {
          throw Error(e.code(), "record " + r.domain + ": " + e.what());
        }
        NodeRecord n;
        n.info.domain = r.domain;
        n.info.ip = to_string(*r.ip);
        n.info.source = r.source;
        n.info.label = r.label;
        n.info.asn = r.asn;
        n.info.sha256_id = fp.sha256_id;
        n.raw_fingerprint = std::move(fp.raw);
        nodes.push_back(std::move(n));
      }
      if (nodes.empty()) throw Error(ErrorCode::kEmptyDataset, "no record matched a scan row");
      report += "total\tnodes=" + std::to_string(nodes.size()) + "\tunresolved=" +
                std::to_string(unresolved) + "\tunscanned=" + std::to_string(unscanned) + "\n";
      write_nodes(at(files::kNodes), nodes);
      detail::write_file(at(files::kParseReport), report);
      return note_list({std::to_string(nodes.size()) + " nodes, " + std::to_string(unscanned) +
                        " unscanned"});
    }

    case Stage::kHeaders: {
      const auto nodes = read_nodes(at(files::kNodes));
      std::vector<HeaderCapture> captures;
      switch (c.header_source) {
        case HeaderSource::kOnline: {
          std::vector<std::string> domains;
          for (const auto& n : nodes) domains.push_back(n.info.domain);
          std::sort(domains.begin(), domains.end());
          domains.erase(std::unique(domains.begin(), domains.end()), domains.end());
          captures = fetch_all(domains, c.fetch);
          break;
        }
        case HeaderSource::kOffline:
          if (!c.offline_captures) throw Error(ErrorCode::kConfig, "headers.offline is not configured");
          captures = read_captures(*c.offline_captures);
          break;
        case HeaderSource::kSkip:
          break;
      }
      std::unordered_map<std::string, std::size_t> by_domain;
      for (std::size_t i = 0; i < captures.size(); ++i) {
        by_domain.try_emplace(normalize_domain(captures[i].domain), i);
      }
      std::vector<HeaderRecord> records;
      std::size_t enriched = 0;
      for (std::uint32_t id = 0; id < nodes.size(); ++id) {
        HeaderRecord h;
        h.id = id;
        if (auto it = by_domain.find(nodes[id].info.domain); it != by_domain.end()) {
          const auto& cap = captures[it->second];
          h.status = cap.status;
          h.fingerprint = header_fingerprint(cap);
          if (h.fingerprint) {
            h.server_value = cap.server_value;
            h.keys = cap.keys;
            ++enriched;
          }
        }
        records.push_back(std::move(h));
      }
      write_captures(at(files::kCaptures), captures);
      write_header_records(at(files::kHeaderFingerprints), records);
      return note_list({std::to_string(enriched) + " of " + std::to_string(nodes.size()) +
                        " nodes have header fingerprints"});
    }

    case Stage::kVectorize: {
      const auto nodes = read_nodes(at(files::kNodes));
      const auto headers = read_header_records(at(files::kHeaderFingerprints));
      if (headers.size() != nodes.size()) {
        throw Error(ErrorCode::kAlignment, "header records do not match nodes");
      }
      std::vector<FeatureRecord> records(nodes.size());
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        records[i].tls = parse_raw(nodes[i].raw_fingerprint).dedup;
        const auto& h = headers[i];
        if (h.id != i) throw Error(ErrorCode::kAlignment, "header records out of order");
        if (h.fingerprint) {
          records[i].header = h.fingerprint;
          records[i].server_value = h.server_value;
          records[i].header_keys = h.keys;
        }
      }
      const auto write_set = [&](HeaderMode mode, const char* vocab_file, const char* vec_file) {
        const auto vocab = build_vocabulary(records, mode);
        std::vector<FeatureVector> vectors;
        vectors.reserve(records.size());
        for (const auto& r : records) vectors.push_back(vectorize(r, vocab));
        write_vocabulary(at(vocab_file), vocab);
        write_vectors(at(vec_file), vectors);
        return vocab.size();
      };
      const auto cols = write_set(c.header_mode, files::kVocabulary, files::kVectors);
      write_set(HeaderMode::kNone, files::kVocabularyTls, files::kVectorsTls);
      return note_list({std::to_string(cols) + " feature columns"});
    }

    case Stage::kIndex: {
      const auto vocab = read_vocabulary(at(files::kVocabulary), c.header_mode);
      const auto vectors = read_vectors(at(files::kVectors), vocab.size());
      const MinHashConfig cfg(c.num_hashes, c.effective_index_seed());
      std::vector<MinHashSignature> signatures;
      signatures.reserve(vectors.size());
      for (const auto& v : vectors) signatures.push_back(minhash(v, cfg));
      // Validates d and l before the signatures are persisted.
      (void)build_forest(signatures, ForestConfig{c.num_trees, c.candidate_factor});
      write_signatures(at(files::kSignatures), signatures);
      return note_list({std::to_string(signatures.size()) + " signatures of " +
                        std::to_string(c.num_hashes) + " components"});
    }

    case Stage::kGraph: {
      const auto forest = build_forest(read_signatures(at(files::kSignatures)),
                                       ForestConfig{c.num_trees, c.candidate_factor});
      const auto graph = build_knn_graph(forest, c.k);
      const auto msf = kruskal_msf(graph);
      write_edges_csv(at(files::kEdges), graph.edges);
      write_edges_csv(at(files::kMst), msf.edges);
      return note_list({std::to_string(graph.edges.size()) + " graph edges, " +
                        std::to_string(msf.edges.size()) + " tree edges, " +
                        std::to_string(graph.component_count) + " components"});
    }

    case Stage::kLayout: {
      const auto n = read_nodes(at(files::kNodes)).size();
      const auto msf = kruskal_msf(make_graph(n, read_edges_csv(at(files::kMst))));
      LayoutConfig lc;
      lc.iterations = c.layout_iterations;
      write_layout_csv(at(files::kLayout), layout_tree(msf, c.effective_layout_seed(), lc));
      return {};
    }

    case Stage::kRender: {
      const auto nodes = load_node_info(out_dir_);
      const auto graph = make_graph(nodes.size(), read_edges_csv(at(files::kEdges)));
      const auto msf = kruskal_msf(make_graph(nodes.size(), read_edges_csv(at(files::kMst))));
      const auto layout = read_layout_csv(at(files::kLayout), msf);
      write_map_outputs(out_dir_, c.map_name, layout, graph, msf, nodes, c.render);
      return {};
    }

    case Stage::kStats: {
      const auto nodes = load_node_info(out_dir_);
      const auto vocab_cols = read_vocabulary(at(files::kVocabulary), c.header_mode).size();
      const auto tls_cols = read_vocabulary(at(files::kVocabularyTls), HeaderMode::kNone).size();
      const auto enriched = read_vectors(at(files::kVectors), vocab_cols);
      const auto tls = read_vectors(at(files::kVectorsTls), tls_cols);
      const auto report = granularity_report(nodes, tls, enriched);
      detail::write_file(at(files::kGranularityCsv), format_granularity_csv(report));
      detail::write_file(at(files::kGranularityTxt), format_granularity_text(report));

      const auto forest = build_forest(read_signatures(at(files::kSignatures)),
                                       ForestConfig{c.num_trees, c.candidate_factor});
      const auto rows = stability_sample(forest, c.stability_sample_size, c.stability_k,
                                         c.effective_stats_seed());
      detail::write_file(at(files::kStability), format_stability_csv(rows));

      const auto graph = make_graph(nodes.size(), read_edges_csv(at(files::kEdges)));
      const auto outliers = list_outliers(graph);
      detail::write_file(at(files::kOutliers), format_node_list(nodes, outliers, OutputFormat::kCsv));

      std::vector<std::string> notes = {std::to_string(outliers.size()) + " outliers"};
      if (c.audit_selection) {
        const auto msf = kruskal_msf(make_graph(nodes.size(), read_edges_csv(at(files::kMst))));
        const auto layout = read_layout_csv(at(files::kLayout), msf);
        std::optional<Verdicts> verdicts;
        if (c.verdicts) verdicts = read_verdicts(*c.verdicts);
        const auto audit = neighborhood_audit(graph, layout, nodes, *c.audit_selection,
                                              verdicts ? &*verdicts : nullptr);
        detail::write_file(at(files::kAudit), format_audit_text(audit));
        notes.push_back("audit over " + std::to_string(audit.total()) + " nodes");
      }
      return notes;
    }
  }
  return {};
}

}  // namespace tlsmap
