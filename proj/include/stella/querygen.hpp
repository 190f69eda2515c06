#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stella/chunker.hpp"
#include "stella/gateway/chat.hpp"
#include "stella/selector.hpp"
#include "stella/terminology.hpp"

namespace stella::querygen {

inline constexpr std::string_view kUndefinable = "Difficult to define within context";

struct TermDescription {
  std::string term;
  std::string description;
  std::size_t context_start = 0;  // passage ordinals of the window, inclusive
  std::size_t context_end = 0;
  bool undefinable = false;
};

nlohmann::json to_json(const TermDescription& d);
TermDescription term_description_from_json(const nlohmann::json& j);

struct DescribedTerms {
  std::vector<TermDescription> defined;      // in distinct_terms order
  std::vector<std::string> undefinable;      // sentinel answers
  std::vector<std::string> dropped;          // gateway failures
  bool taq_skipped = false;                  // fewer than 2 defined terms
};

// `doc_passages` holds the passages of the candidate's document (any order).
// The context window is ordinals [c-w, c+w] clipped to what exists.
DescribedTerms describe_terms(const selector::CandidatePassage& passage,
                              const std::vector<chunker::Passage>& doc_passages, gateway::ChatGateway& gateway,
                              std::size_t w = 2);

enum class QueryType { tcq, taq };
std::string_view to_string(QueryType t);  // "TCQ", "TAQ"
std::optional<QueryType> parse_query_type(std::string_view s);

struct CoDStep {
  std::string query;
  std::vector<std::string> recognized_entities;
  std::vector<std::string> entities_added;
  std::string self_feedback;
  std::optional<std::vector<std::string>> descriptions_referenced;
};

struct QueryRecord {
  std::string query_id;
  std::string passage_id;
  QueryType qtype = QueryType::tcq;
  selector::Intent intent = selector::Intent::def;
  std::string language = "en";
  std::string final_query;
  std::string reported_intention;  // the model's "intention" echo
  std::array<CoDStep, 3> trace;
  std::vector<TermDescription> identified_terms;
  std::size_t repair_rounds = 0;
  bool valid = true;
  std::vector<std::string> violations;  // last validation, when invalid
};

std::string query_id(std::string_view passage_id, QueryType t);  // "<passage_id>:tcq"

nlohmann::json to_json(const QueryRecord& r);
QueryRecord query_record_from_json(const nlohmann::json& j);  // Error(parse)
std::vector<QueryRecord> load_queries(const std::filesystem::path& path);

enum class Constraint {
  schema,
  forbidden_form,      // 2
  sentence_length,     // 3
  intention,           // 4
  term_usage,          // 6
  entity_granularity,  // 7
  step1_reservation,   // 8
};
std::string_view to_string(Constraint c);

struct Violation {
  Constraint constraint = Constraint::schema;
  int step = 0;  // 1..3, 0 for the whole output
  std::string message;

  std::string render() const;  // "step_2 [sentence_length] query has 28 tokens, needs 15-25"
};

// Single-query checks shared with the validator, exposed for tests.
std::optional<std::string> forbidden_form(std::string_view query);
std::size_t terminal_marks(std::string_view query);  // sentence terminators outside abbreviations/decimals

// Model JSON -> record fields. Returns schema violations; the record keeps
// whatever parsed.
std::vector<Violation> parse_trace(std::string_view model_json, QueryRecord& record);

// The machine-checkable hard constraints. Term rules use the record's
// identified_terms: TCQ needs one verbatim in steps 2 and 3 (distinct terms
// added); TAQ bans all of them from every query under case, hyphen and
// plural folding. Passage answerability, intent preservation and outside
// knowledge are left to the judge.
std::vector<Violation> validate_constraints(const QueryRecord& record);

struct GenerationConfig {
  std::size_t max_repairs = 3;
  double temperature = gateway::kGenerationTemperature;
};

// One chat call with the generation template, then up to max_repairs
// re-prompts carrying the violation list. A record still failing after that
// comes back with valid = false (ConstraintUnsatisfiable, excluded from
// export). Gateway errors propagate.
QueryRecord generate_query(QueryType type, const selector::CandidatePassage& passage,
                           const std::vector<TermDescription>& terms, gateway::ChatGateway& gateway,
                           const GenerationConfig& cfg = {});
QueryRecord generate_tcq(const selector::CandidatePassage& passage, const std::vector<TermDescription>& terms,
                         gateway::ChatGateway& gateway, const GenerationConfig& cfg = {});
QueryRecord generate_taq(const selector::CandidatePassage& passage, const std::vector<TermDescription>& terms,
                         gateway::ChatGateway& gateway, const GenerationConfig& cfg = {});

// TCQ needs two terms even when fewer are definable: the defined ones first,
// then remaining distinct terms with an empty description.
std::vector<TermDescription> tcq_terms(const selector::CandidatePassage& passage, const DescribedTerms& described);

struct QualityScore {
  double answerability = 0;
  double no_external_knowledge = 0;
  double intent_adherence = 0;
  double format_compliance = 0;
  double style_length = 0;
  double mean = 0;
};

inline constexpr std::array<std::string_view, 5> kQualityMetrics = {
    "answerability", "no_external_knowledge", "intent_adherence", "format_compliance", "style_length"};

// Parses the judge JSON; every metric must be a number in [1, 5], otherwise
// Error(invalid_score).
QualityScore parse_quality(std::string_view model_json);
QualityScore judge_quality(const QueryRecord& record, std::string_view passage_text, gateway::ChatGateway& gateway);
nlohmann::json to_json(const QualityScore& s);

}  // namespace stella::querygen
