#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tlsmap/error.hpp"
#include "tlsmap/pipeline.hpp"
#include "tlsmap/query.hpp"

namespace fs = std::filesystem;
using namespace tlsmap;

namespace {

// Values given on the command line; each one overrides the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::optional<std::string> out_dir;

  std::vector<std::string> lists;
  std::optional<std::string> asn_db;

  std::optional<std::string> scan;
  std::optional<std::string> domain_column;
  std::optional<std::string> fingerprint_column;

  std::optional<std::uint32_t> timeout_secs;
  std::optional<std::size_t> concurrency;
  std::optional<std::string> user_agent;
  std::optional<std::string> offline;
  bool allow_http_fallback = false;
  bool skip_headers = false;

  std::optional<std::string> header_mode;

  std::optional<std::size_t> num_hashes;
  std::optional<std::size_t> num_trees;
  std::optional<std::size_t> candidate_factor;

  std::optional<std::size_t> k;
  std::optional<std::size_t> iterations;
  std::optional<std::string> map_name;

  std::optional<std::size_t> sample_size;
  std::optional<std::string> audit_ids;
  std::optional<std::string> audit_region;
  std::optional<std::string> verdicts;
};

struct QueryArgs {
  std::optional<std::string> domain;
  std::size_t k = 10;
  std::string format = "text";
  bool outliers = false;
  std::optional<std::string> fingerprint;
};

void add_ingest_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--list", o.lists, "Domain list as path,source,label (repeatable)");
  cmd->add_option("--asn-db", o.asn_db, "pyasn-style prefix-to-ASN table");
}

void add_parse_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--scan", o.scan, "Scanner output (CSV or JSON lines)");
  cmd->add_option("--domain-column", o.domain_column, "Column holding the domain");
  cmd->add_option("--fingerprint-column", o.fingerprint_column, "Column holding the raw fingerprint");
}

void add_header_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--timeout-secs", o.timeout_secs, "Per-request timeout in seconds");
  cmd->add_option("--concurrency", o.concurrency, "Maximum concurrent fetches")->check(CLI::PositiveNumber);
  cmd->add_option("--user-agent", o.user_agent, "User-Agent header value");
  cmd->add_option("--offline", o.offline, "Read stored captures instead of fetching");
  cmd->add_flag("--allow-http-fallback", o.allow_http_fallback, "Retry over plain HTTP after a TLS failure");
  cmd->add_flag("--skip-headers", o.skip_headers, "Do not capture headers at all");
}

void add_feature_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--header-mode", o.header_mode, "none, hash_only or per_key")
      ->check(CLI::IsMember({"none", "hash_only", "per_key"}));
}

void add_index_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-d,--num-hashes", o.num_hashes, "MinHash permutations")->check(CLI::PositiveNumber);
  cmd->add_option("-l,--num-trees", o.num_trees, "LSH forest prefix trees")->check(CLI::PositiveNumber);
  cmd->add_option("--candidate-factor", o.candidate_factor, "Candidate widening factor c")
      ->check(CLI::PositiveNumber);
}

void add_graph_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-k", o.k, "Neighbours per node in the k-NN graph");
}

void add_layout_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--iterations", o.iterations, "Force-directed refinement iterations");
}

void add_render_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--name", o.map_name, "Base name of the map outputs");
}

void add_stats_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--sample-size", o.sample_size, "Stability sample size");
  auto* ids = cmd->add_option("--audit-ids", o.audit_ids, "Comma-separated node ids to audit");
  cmd->add_option("--audit-region", o.audit_region, "Layout rectangle x0,y0,x1,y1 to audit")->excludes(ids);
  cmd->add_option("--verdicts", o.verdicts, "domain,verdict CSV for reclassification");
}

PipelineConfig resolve_config(const Overrides& o) {
  PipelineConfig c;
  if (o.config) c = PipelineConfig::load(*o.config);
  const fs::path cwd;
  if (o.seed) c.seed = *o.seed;
  if (o.out_dir) c.out_dir = fs::path(*o.out_dir);

  if (!o.lists.empty()) {
    c.lists.clear();
    for (const auto& l : o.lists) c.lists.push_back(parse_domain_list(l, cwd));
  }
  if (o.asn_db) c.asn_db = fs::path(*o.asn_db);

  if (o.scan) c.scan = fs::path(*o.scan);
  if (o.domain_column) c.scan_columns.domain = *o.domain_column;
  if (o.fingerprint_column) c.scan_columns.fingerprint = *o.fingerprint_column;

  if (o.timeout_secs) c.fetch.timeout = std::chrono::seconds(*o.timeout_secs);
  if (o.concurrency) c.fetch.concurrency = *o.concurrency;
  if (o.user_agent) c.fetch.user_agent = *o.user_agent;
  if (o.allow_http_fallback) c.fetch.allow_http_fallback = true;
  if (o.offline) {
    c.offline_captures = fs::path(*o.offline);
    c.header_source = HeaderSource::kOffline;
  }
  if (o.skip_headers) c.header_source = HeaderSource::kSkip;

  if (o.header_mode) c.header_mode = parse_header_mode(*o.header_mode);

  if (o.num_hashes) c.num_hashes = *o.num_hashes;
  if (o.num_trees) c.num_trees = *o.num_trees;
  if (o.candidate_factor) c.candidate_factor = *o.candidate_factor;

  if (o.k) c.k = *o.k;
  if (o.iterations) c.layout_iterations = *o.iterations;
  if (o.map_name) c.map_name = *o.map_name;

  if (o.sample_size) c.stability_sample_size = *o.sample_size;
  if (o.audit_ids) c.audit_selection = parse_id_list(*o.audit_ids);
  if (o.audit_region) c.audit_selection = parse_region(*o.audit_region);
  if (o.verdicts) c.verdicts = fs::path(*o.verdicts);
  return c;
}

void report(const StageOutcome& outcome) {
  std::cerr << to_string(outcome.stage) << ": " << (outcome.skipped ? "up to date" : "done");
  for (const auto& note : outcome.notes) std::cerr << "; " << note;
  std::cerr << '\n';
}

int run_query(const PipelineConfig& config, const fs::path& out_dir, const QueryArgs& q) {
  const auto format = parse_output_format(q.format);
  const int modes = int(q.domain.has_value()) + int(q.outliers) + int(q.fingerprint.has_value());
  if (modes != 1) {
    std::cerr << "tlsmap query: give exactly one of --domain, --outliers, --fingerprint\n";
    return 2;
  }
  if (q.fingerprint) {
    const auto nodes = load_node_info(out_dir);
    const auto ids = find_fingerprint(nodes, *q.fingerprint);
    std::cout << format_node_list(nodes, ids, format);
    return 0;
  }
  const auto artifacts =
      load_artifacts(out_dir, ForestConfig{config.num_trees, config.candidate_factor});
  if (q.outliers) {
    const auto ids = list_outliers(artifacts.graph);
    std::cout << format_node_list(artifacts.nodes, ids, format);
    return 0;
  }
  const auto result = query_domain(artifacts.nodes, artifacts.forest, *q.domain, q.k);
  if (!result.duplicate_ids.empty()) {
    std::cerr << "warning: " << *q.domain << " appears as ids " << result.query_id;
    for (auto id : result.duplicate_ids) std::cerr << ", " << id;
    std::cerr << "; querying id " << result.query_id << '\n';
  }
  std::cout << format_neighbors(result.rows, format);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster TLS server fingerprints enriched with HTTP header order"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kToolVersion));

  Overrides o;
  QueryArgs q;
  app.add_option("--seed", o.seed, "Master seed for every randomised stage");
  app.add_option("--config", o.config, "Pipeline configuration file")->check(CLI::ExistingFile);
  app.add_option("--out-dir", o.out_dir, "Directory holding stage outputs and the manifest");

  struct Command {
    CLI::App* app;
    std::optional<Stage> stage;
  };
  std::vector<Command> commands;
  const auto stage_cmd = [&](Stage stage, const std::string& help) {
    auto* cmd = app.add_subcommand(std::string(to_string(stage)), help);
    commands.push_back({cmd, stage});
    return cmd;
  };
  add_ingest_options(stage_cmd(Stage::kIngest, "Load domain lists and attach ASNs"), o);
  add_parse_options(stage_cmd(Stage::kParse, "Parse raw TLS fingerprints from scan output"), o);
  add_header_options(stage_cmd(Stage::kHeaders, "Capture or load HTTP header order"), o);
  add_feature_options(stage_cmd(Stage::kVectorize, "Build the vocabulary and binary vectors"), o);
  add_index_options(stage_cmd(Stage::kIndex, "Compute MinHash signatures"), o);
  {
    auto* graph = stage_cmd(Stage::kGraph, "Build the k-NN graph and its spanning forest");
    add_graph_options(graph, o);
    add_index_options(graph, o);
  }
  add_layout_options(stage_cmd(Stage::kLayout, "Place spanning-forest nodes on the plane"), o);
  add_render_options(stage_cmd(Stage::kRender, "Write the HTML map and GraphML export"), o);
  add_stats_options(stage_cmd(Stage::kStats, "Write granularity, stability, outlier and audit reports"), o);

  auto* run = app.add_subcommand("run", "Run every stage in order, skipping up-to-date ones");
  commands.push_back({run, std::nullopt});
  for (auto add : {add_ingest_options, add_parse_options, add_header_options, add_feature_options,
                   add_index_options, add_graph_options, add_layout_options, add_render_options,
                   add_stats_options}) {
    add(run, o);
  }

  auto* query = app.add_subcommand("query", "Query a finished run");
  query->add_option("--domain", q.domain, "Domain whose neighbours to list");
  query->add_option("-k", q.k, "Number of neighbours");
  query->add_option("--format", q.format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
  query->add_flag("--outliers", q.outliers, "List nodes without graph edges");
  query->add_option("--fingerprint", q.fingerprint, "List nodes whose sha256 id starts with this prefix");
  add_index_options(query, o);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = resolve_config(o);
    const fs::path out_dir = config.out_dir.value_or(fs::path("tlsmap-out"));
    if (query->parsed()) return run_query(config, out_dir, q);

    Pipeline pipeline(config, out_dir);
    if (run->parsed()) {
      for (Stage s : all_stages()) report(pipeline.run_stage(s));
      return 0;
    }
    for (const auto& c : commands) {
      if (c.app->parsed() && c.stage) report(pipeline.run_stage(*c.stage));
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "tlsmap: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "tlsmap: " << e.what() << '\n';
    return 1;
  }
}
