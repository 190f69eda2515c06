#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stella/chunker.hpp"
#include "stella/querygen.hpp"
#include "stella/xlingual.hpp"

namespace stella::benchmark {

struct CorpusEntry {
  std::string id;
  std::string title;
  std::string text;
  bool operator==(const CorpusEntry&) const = default;
};

struct QueryEntry {
  std::string id;
  std::string text;
  nlohmann::json metadata = nlohmann::json::object();  // intent, qtype, language, source_doc_id
  bool operator==(const QueryEntry&) const = default;
};

struct Qrel {
  std::string query_id;
  std::string corpus_id;
  int score = 1;
  bool operator==(const Qrel&) const = default;
};

// One language split in the BEIR layout.
struct BeirSplit {
  std::vector<CorpusEntry> corpus;  // sorted by id
  std::vector<QueryEntry> queries;  // sorted by id
  std::vector<Qrel> qrels;          // sorted by (query_id, corpus_id)
  bool operator==(const BeirSplit&) const = default;
};

inline constexpr std::string_view kQrelsHeader = "query-id\tcorpus-id\tscore";

// Passages -> corpus entries; titles looked up by doc_id when given.
std::vector<CorpusEntry> corpus_from_passages(const std::vector<chunker::Passage>& passages,
                                              const std::map<std::string, std::string>& titles = {});

struct ExportReport {
  struct Language {
    std::size_t queries = 0;
    std::size_t excluded_invalid = 0;       // ConstraintUnsatisfiable English source
    std::size_t excluded_preservation = 0;  // TermPreservationFailure
  };
  std::map<std::string, Language> languages;
  nlohmann::json to_json() const;
};

// Builds the splits in memory: "en" from valid English records, one split per
// language present in `translations` from records whose English source was
// exported and whose term check passed. Throws DuplicateId / DanglingQrel.
std::map<std::string, BeirSplit> build_splits(const std::vector<CorpusEntry>& corpus,
                                              const std::vector<querygen::QueryRecord>& queries,
                                              const std::vector<xlingual::TranslationRecord>& translations,
                                              ExportReport* report = nullptr);

// <out_dir>/<lang>/{corpus.jsonl, queries.jsonl, qrels/test.tsv}; the corpus
// file is identical in every split.
void write_split(const BeirSplit& split, const std::filesystem::path& dir);
ExportReport export_beir(const std::vector<CorpusEntry>& corpus, const std::vector<querygen::QueryRecord>& queries,
                         const std::vector<xlingual::TranslationRecord>& translations,
                         const std::filesystem::path& out_dir);

// Reads and validates one split directory. Errors: parse (with file and
// line), duplicate_id, dangling_qrel, missing_artifact.
BeirSplit load_beir(const std::filesystem::path& dir);

// Every subdirectory holding a queries.jsonl, keyed by directory name.
std::map<std::string, BeirSplit> load_benchmark(const std::filesystem::path& root);

// Integrity checks shared by build and load.
void validate(const BeirSplit& split, const std::string& origin);

}  // namespace stella::benchmark
