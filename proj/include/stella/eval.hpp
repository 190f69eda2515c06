#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "stella/benchmark.hpp"
#include "stella/gateway/embedder.hpp"
#include "stella/selector.hpp"

namespace stella::eval {

// Lowercased chunker tokens with pure-punctuation tokens dropped.
std::vector<std::string> analyze(std::string_view text);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Hit {
  std::string passage_id;
  double score = 0;
};

using Ranking = std::vector<Hit>;                       // score descending, ties by passage_id
using RunResult = std::map<std::string, Ranking>;        // query_id -> ranking
using Qrels = std::map<std::string, std::map<std::string, int>>;  // query_id -> passage_id -> relevance

class Bm25Index {
 public:
  struct Doc {
    std::string id;
    std::string text;
  };

  Bm25Index(const std::vector<Doc>& docs, Bm25Params params = {});
  // BEIR corpus: title and text are indexed together.
  static Bm25Index from_corpus(const std::vector<benchmark::CorpusEntry>& corpus, Bm25Params params = {});

  double idf(const std::string& term) const;
  // Throws Error(unknown_passage).
  double score(const std::vector<std::string>& query_tokens, std::string_view passage_id) const;
  Ranking search(std::string_view query, std::size_t cutoff) const;

  std::size_t size() const { return ids_.size(); }
  double avgdl() const { return avgdl_; }
  std::size_t doc_length(std::string_view passage_id) const;
  std::size_t doc_frequency(const std::string& term) const;

 private:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
  };
  Bm25Params params_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> id_index_;
  std::vector<std::uint32_t> lengths_;
  double avgdl_ = 0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;  // sorted by doc
};

// Exact cosine top-k over unit-normalized corpus vectors.
class DenseIndex {
 public:
  DenseIndex(std::vector<std::string> ids, const std::vector<std::vector<double>>& vectors);
  // Throws Error(dimension_mismatch) when the query dimension differs.
  Ranking search(const std::vector<double>& query, std::size_t cutoff) const;
  std::size_t dimension() const { return dim_; }

 private:
  std::vector<std::string> ids_;
  std::vector<double> unit_;  // row-major
  std::size_t dim_ = 0;
};

Ranking top_k(std::vector<Hit> hits, std::size_t cutoff);

RunResult run_bm25(const Bm25Index& index, const std::vector<benchmark::QueryEntry>& queries, std::size_t cutoff,
                   std::size_t workers = 1);
RunResult run_dense(gateway::Embedder& embedder, const std::vector<benchmark::CorpusEntry>& corpus,
                    const std::vector<benchmark::QueryEntry>& queries, std::size_t cutoff,
                    const std::string& query_prefix = {}, const std::string& passage_prefix = {});

Qrels qrels_from(const std::vector<benchmark::Qrel>& qrels);

// Binary relevance (rel > 0). DCG = sum rel_i / log2(i + 1) over the top k.
double ndcg_at_k(const Ranking& ranking, const std::map<std::string, int>& relevant, std::size_t k = 10);

struct Evaluation {
  std::map<std::string, double> per_query;
  double mean = 0;
};
// Throws Error(missing_qrels) when a run query has no judgments.
Evaluation evaluate(const RunResult& run, const Qrels& qrels, std::size_t k = 10);

struct LanguageScores {
  double overall = 0;
  double tcq_avg = 0;
  double taq_avg = 0;
  std::size_t queries = 0;
};

struct MetricReport {
  std::string retriever;
  std::size_t k = 10;
  std::string primary_language = "en";
  double overall = 0;
  double tcq_avg = 0;
  double taq_avg = 0;
  double gap = 0;  // tcq_avg - taq_avg
  std::size_t tcq_count = 0;
  std::size_t taq_count = 0;
  std::map<std::string, double> per_intent;  // "TCQ/Def", "TAQ/Anom", ...
  std::map<std::string, LanguageScores> per_language;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

struct SplitScores {
  std::map<std::string, double> per_query;          // nDCG by query id
  std::vector<benchmark::QueryEntry> queries;       // metadata: qtype, intent
};

// Headline numbers come from `primary` (the English split when present);
// per_language covers every split. Queries absent from a run count as 0.
MetricReport build_report(const std::map<std::string, SplitScores>& splits, const std::string& retriever,
                          std::size_t k = 10, const std::string& primary = "en");

// `query_id Q0 passage_id rank score tag`, queries in id order.
std::string to_trec_run(const RunResult& run, std::string_view tag);

struct IntentF1 {
  std::size_t support = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct F1Report {
  double micro_f1 = 0;
  double macro_f1 = 0;  // over labels seen in either map
  std::map<selector::Intent, IntentF1> per_intent;
  nlohmann::json to_json() const;
};

// Throws Error(key_mismatch) when the key sets differ.
F1Report f1_validate(const std::map<std::string, selector::Intent>& predictions,
                     const std::map<std::string, selector::Intent>& reference);

// JSONL rows {"passage_id": ..., "intent": ...}; candidates.jsonl rows also
// work (id taken from "passage").
std::map<std::string, selector::Intent> load_intent_labels(const std::filesystem::path& path);

}  // namespace stella::eval
