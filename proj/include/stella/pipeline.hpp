#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stella/chunker.hpp"
#include "stella/error.hpp"
#include "stella/eval.hpp"
#include "stella/gateway/chat.hpp"
#include "stella/gateway/embedder.hpp"
#include "stella/gateway/tagger.hpp"
#include "stella/querygen.hpp"
#include "stella/selector.hpp"
#include "stella/terminology.hpp"
#include "stella/xlingual.hpp"

namespace stella::pipeline {

namespace fs = std::filesystem;

// Artifact locations. Relative paths in a config file resolve against the
// file's directory; derived artifacts live under work_dir.
struct Paths {
  fs::path manifest;
  fs::path freq;
  fs::path labels;  // optional expert intent labels
  fs::path work_dir = "stella-out";

  fs::path accepted() const { return work_dir / "accepted.jsonl"; }
  fs::path ledger() const { return work_dir / "ledger.json"; }
  fs::path passages() const { return work_dir / "passages.jsonl"; }
  fs::path dict() const { return work_dir / "dict.json"; }
  fs::path candidates() const { return work_dir / "candidates.jsonl"; }
  fs::path queries() const { return work_dir / "queries.jsonl"; }
  fs::path translations() const { return work_dir / "translations.jsonl"; }
  fs::path audit() const { return work_dir / "audit.json"; }
  fs::path beir() const { return work_dir / "beir"; }
  fs::path report() const { return work_dir / "report.json"; }
};

struct EmbedProfile {
  gateway::ProviderProfile profile;
  std::string query_prefix;
  std::string passage_prefix;
};

struct PipelineConfig {
  Paths paths;
  std::uint64_t seed = 0;
  std::size_t workers = 4;

  gateway::ProviderProfile chat;
  EmbedProfile embed;
  std::optional<gateway::ProviderProfile> tagger;  // heuristic tagger when absent

  chunker::ChunkConfig chunk;
  terms::TermFilterConfig terms;
  std::size_t min_distinct = 5;
  selector::ClusterConfig cluster;
  std::size_t sample = 0;  // per-intent pool cap, 0 = whole pool
  std::size_t context_window = 2;
  querygen::GenerationConfig generation;
  std::vector<std::string> languages{"ko", "id", "th", "fr", "zh", "ja"};
  xlingual::TranslateConfig translation;
  double bt_threshold = 0.93;
  std::string retriever = "bm25";
  std::size_t eval_k = 10;
  eval::Bm25Params bm25;

  // Offline: simulated chat model, hashing embedder, heuristic tagger.
  bool mock = false;

  void validate() const;  // Error(config)
  nlohmann::json to_json() const;  // no secrets
};

// Parses TOML. API keys come from the environment variable named by each
// profile's api_key_env (never from the file itself).
PipelineConfig parse_config(std::string_view toml_text, const fs::path& base_dir);
PipelineConfig load_config(const fs::path& path);

// Model clients built from the config; mock mode needs no network.
struct Clients {
  std::shared_ptr<gateway::ChatGateway> chat;
  std::unique_ptr<gateway::Embedder> embedder;
  std::unique_ptr<gateway::Tagger> tagger;
};
Clients make_clients(const PipelineConfig& cfg);

// Provenance record written next to a stage's outputs.
struct StageManifest {
  std::string stage;
  std::map<std::string, std::string> inputs;   // role -> sha256
  std::map<std::string, std::string> outputs;  // role -> sha256
  std::map<std::string, std::string> files;    // role -> output path relative to the manifest's parent dir
  std::string config_hash;
  nlohmann::json counts = nlohmann::json::object();

  nlohmann::json to_json() const;
  static StageManifest from_json(const nlohmann::json& j);
};

fs::path manifest_dir(const fs::path& output);  // <parent of output>/manifests
void write_manifest(const StageManifest& m, const fs::path& dir);

// Every manifest in `dir`: each input fingerprint must equal the output
// fingerprint recorded for the same role by its producing stage, and every
// recorded output must still hash the same on disk. Returns the problems
// found (empty when the chain holds).
std::vector<std::string> verify_chain(const fs::path& dir);

// Throws Error(missing_artifact) naming the stage that produces it.
void require_artifact(const fs::path& path, std::string_view role, std::string_view producer);

// Hash of a directory tree's regular files (relative path + content).
std::string tree_sha256(const fs::path& dir);

// One function per stage. Each checks its inputs, writes its outputs
// atomically, writes a manifest and returns it.
StageManifest run_ingest(const fs::path& manifest, const fs::path& out_dir);
StageManifest run_chunk(const fs::path& accepted, const fs::path& out, const chunker::ChunkConfig& cfg);
StageManifest run_terms(const fs::path& passages, const fs::path& freq, const fs::path& out,
                        const terms::TermFilterConfig& cfg, gateway::Tagger& tagger, std::size_t workers);

struct SelectOptions {
  selector::ClusterConfig cluster;
  std::size_t min_distinct = 5;
  std::size_t sample = 0;
  std::size_t workers = 4;
};
StageManifest run_select(const fs::path& passages, const fs::path& dict, const fs::path& out,
                         const SelectOptions& opt, gateway::ChatGateway& chat, gateway::Embedder& embedder);

struct GenerateOptions {
  querygen::GenerationConfig generation;
  std::size_t context_window = 2;
  std::size_t workers = 4;
};
StageManifest run_generate(const fs::path& candidates, const fs::path& passages, const fs::path& out,
                           const GenerateOptions& opt, gateway::ChatGateway& chat);

StageManifest run_translate(const fs::path& queries, const fs::path& dict, const fs::path& out,
                            const std::vector<std::string>& languages, const xlingual::TranslateConfig& cfg,
                            gateway::ChatGateway& chat, std::size_t workers);
StageManifest run_audit(const fs::path& translations, const fs::path& out, double threshold,
                        gateway::ChatGateway& chat, gateway::Embedder& embedder);
StageManifest run_export(const fs::path& passages, const fs::path& accepted, const fs::path& queries,
                         const fs::path& translations, const fs::path& out_dir);

struct EvalOptions {
  std::string retriever = "bm25";  // or "dense"
  std::size_t k = 10;
  eval::Bm25Params bm25;
  std::size_t workers = 4;
  std::string query_prefix;
  std::string passage_prefix;
};
// `beir` is either one split directory or a root of language splits.
// Writes the report JSON to `out` and TREC runs next to it.
StageManifest run_eval(const fs::path& beir, const fs::path& out, const EvalOptions& opt,
                       gateway::Embedder* embedder);
eval::MetricReport evaluate_benchmark(const std::map<std::string, benchmark::BeirSplit>& splits,
                                      const EvalOptions& opt, gateway::Embedder* embedder,
                                      std::map<std::string, eval::RunResult>* runs = nullptr);

// Every stage in order over cfg.paths, then verify_chain. Writes
// <work_dir>/fingerprints.json (artifact -> sha256) and returns it.
nlohmann::json run_all(const PipelineConfig& cfg);

// Structured JSON log lines on stderr: {"ts", "level", "event", ...fields}.
void configure_logging(std::string_view level);
void log_event(std::string_view level, std::string_view event, const nlohmann::json& fields = nlohmann::json::object());

}  // namespace stella::pipeline
