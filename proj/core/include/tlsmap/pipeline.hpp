#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlsmap/analysis.hpp"
#include "tlsmap/config.hpp"
#include "tlsmap/features.hpp"
#include "tlsmap/http_headers.hpp"
#include "tlsmap/ingest.hpp"
#include "tlsmap/node.hpp"
#include "tlsmap/render.hpp"
#include "tlsmap/simgraph.hpp"
#include "tlsmap/simindex.hpp"
#include "tlsmap/tls_fingerprint.hpp"

namespace tlsmap {

inline constexpr const char* kToolVersion = "0.1.0";

struct DomainList {
  std::filesystem::path path;
  std::string source;
  Label label = Label::kUnknown;
};

enum class HeaderSource { kOnline, kOffline, kSkip };

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> out_dir;

  // ingest
  std::vector<DomainList> lists;
  std::optional<std::filesystem::path> asn_db;
  std::optional<std::uint64_t> ingest_seed;

  // parse
  std::optional<std::filesystem::path> scan;
  ScanColumns scan_columns;

  // headers
  HeaderSource header_source = HeaderSource::kOnline;
  std::optional<std::filesystem::path> offline_captures;
  FetchConfig fetch = FetchConfig::from_environment();

  // features
  HeaderMode header_mode = HeaderMode::kHashOnly;

  // index
  std::size_t num_hashes = 1024;
  std::size_t num_trees = 128;
  std::size_t candidate_factor = 10;
  std::optional<std::uint64_t> index_seed;

  // graph
  std::size_t k = 100;

  // layout
  std::optional<std::uint64_t> layout_seed;
  std::size_t layout_iterations = 300;

  // render
  std::string map_name = "map";
  RenderSpec render;

  // stats
  std::size_t stability_sample_size = 20;
  std::size_t stability_k = 10;
  std::optional<std::uint64_t> stats_seed;
  std::optional<Selection> audit_selection;
  std::optional<std::filesystem::path> verdicts;

  std::uint64_t effective_ingest_seed() const { return ingest_seed.value_or(seed); }
  std::uint64_t effective_index_seed() const { return index_seed.value_or(seed); }
  std::uint64_t effective_layout_seed() const { return layout_seed.value_or(seed); }
  std::uint64_t effective_stats_seed() const { return stats_seed.value_or(seed); }

  // Relative paths resolve against `base_dir`. Unknown keys are errors.
  static PipelineConfig from_ini(const IniFile& ini, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);
};

// "x0,y0,x1,y1" and "1,2,3" helpers shared by config and CLI.
Region parse_region(std::string_view text);
std::vector<std::uint32_t> parse_id_list(std::string_view text);
DomainList parse_domain_list(std::string_view text, const std::filesystem::path& base_dir);

enum class Stage { kIngest, kParse, kHeaders, kVectorize, kIndex, kGraph, kLayout, kRender, kStats };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);
const std::vector<Stage>& all_stages();

struct StageOutcome {
  Stage stage;
  bool skipped = false;  // inputs and outputs matched the manifest
  std::vector<std::string> notes;
};

// File names inside the output directory.
namespace files {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kRecords = "records.jsonl";
inline constexpr const char* kIngestReport = "ingest_report.txt";
inline constexpr const char* kNodes = "nodes.jsonl";
inline constexpr const char* kParseReport = "parse_report.txt";
inline constexpr const char* kCaptures = "captures.jsonl";
inline constexpr const char* kHeaderFingerprints = "header_fingerprints.jsonl";
inline constexpr const char* kVocabulary = "vocabulary.json";
inline constexpr const char* kVectors = "vectors.jsonl";
inline constexpr const char* kVocabularyTls = "vocabulary_tls.json";
inline constexpr const char* kVectorsTls = "vectors_tls.jsonl";
inline constexpr const char* kSignatures = "signatures.jsonl";
inline constexpr const char* kEdges = "edges.csv";
inline constexpr const char* kMst = "mst.csv";
inline constexpr const char* kLayout = "layout.csv";
inline constexpr const char* kGranularityCsv = "granularity.csv";
inline constexpr const char* kGranularityTxt = "granularity.txt";
inline constexpr const char* kStability = "stability.csv";
inline constexpr const char* kOutliers = "outliers.csv";
inline constexpr const char* kAudit = "audit.txt";
}  // namespace files

// One scanned server as stored in nodes.jsonl.
struct NodeRecord {
  NodeInfo info;
  std::string raw_fingerprint;
};

void write_nodes(const std::filesystem::path& path, const std::vector<NodeRecord>& nodes);
std::vector<NodeRecord> read_nodes(const std::filesystem::path& path);

// Per-node header enrichment as stored in header_fingerprints.jsonl.
struct HeaderRecord {
  std::uint32_t id = 0;
  std::optional<FetchStatus> status;  // absent when no capture exists
  std::optional<HeaderFingerprint> fingerprint;
  std::optional<std::string> server_value;
  std::vector<std::string> keys;
};

void write_header_records(const std::filesystem::path& path,
                          std::span<const HeaderRecord> records);
std::vector<HeaderRecord> read_header_records(const std::filesystem::path& path);

// Node metadata joined with header hashes from an output directory.
std::vector<NodeInfo> load_node_info(const std::filesystem::path& out_dir);

// Read-only view over a finished run for ad hoc queries.
struct Artifacts {
  std::vector<NodeInfo> nodes;
  LshForest forest;
  SimilarityGraph graph;
};

Artifacts load_artifacts(const std::filesystem::path& out_dir, const ForestConfig& forest);

// Runs stages against an output directory and keeps manifest.json there. A
// stage is skipped when its parameters and input digests match the manifest
// and its recorded outputs are still present and unchanged.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::filesystem::path out_dir);

  StageOutcome run_stage(Stage stage);
  std::vector<StageOutcome> run_all();

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& out_dir() const { return out_dir_; }

 private:
  struct StageIo {
    std::vector<std::filesystem::path> inputs;
    std::vector<std::string> outputs;  // relative to out_dir
  };

  StageIo stage_io(Stage stage) const;
  std::string stage_params(Stage stage) const;
  std::vector<std::string> execute(Stage stage);

  PipelineConfig config_;
  std::filesystem::path out_dir_;
};

}  // namespace tlsmap
