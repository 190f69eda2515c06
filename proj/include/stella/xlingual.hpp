#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stella/gateway/chat.hpp"
#include "stella/gateway/embedder.hpp"
#include "stella/querygen.hpp"
#include "stella/terminology.hpp"

namespace stella::xlingual {

inline constexpr std::array<std::string_view, 6> kTargetLanguages = {"ko", "id", "th", "fr", "zh", "ja"};

bool is_target_language(std::string_view code);
std::string language_name(std::string_view code);  // "ko" -> "Korean"; Error(precondition) if unknown

struct TranslationRecord {
  std::string query_id;  // the English query's id
  std::string passage_id;
  querygen::QueryType qtype = querygen::QueryType::tcq;
  std::string language;
  std::string source_query;
  std::string translated_query;
  std::vector<std::string> kept_terms;  // TCQ only
  std::optional<std::string> back_translation;
  std::optional<double> bt_cosine;
  bool term_check_passed = true;
  std::size_t repair_rounds = 0;
};

nlohmann::json to_json(const TranslationRecord& r);
TranslationRecord translation_from_json(const nlohmann::json& j);  // Error(parse)
std::vector<TranslationRecord> load_translations(const std::filesystem::path& path);

// Dictionary matches in the query, as the query spells them, first
// occurrence order, no repeats.
std::vector<std::string> kept_terms_for(std::string_view query, const terms::TerminologyDictionary& dict);

// Terms from `kept` not found verbatim (case-sensitive) in `translated`.
std::vector<std::string> missing_terms(std::string_view translated, const std::vector<std::string>& kept);

// Drops wrapping quotes, "Output:"-style labels and anything after the
// first non-empty line.
std::string clean_translation(std::string_view model_text);

struct TranslateConfig {
  std::size_t max_repairs = 3;
  double temperature = 0.0;
};

// TCQ: keep list injected and checked, up to max_repairs re-prompts; a record
// still missing terms comes back with term_check_passed = false
// (TermPreservationFailure, excluded from export). TAQ: full translation.
TranslationRecord translate_query(const querygen::QueryRecord& record, std::string_view lang,
                                  const terms::TerminologyDictionary& dict, gateway::ChatGateway& gateway,
                                  const TranslateConfig& cfg = {});

struct LanguageBtStats {
  std::size_t records = 0;
  std::size_t scored = 0;
  std::size_t errors = 0;  // gateway/embedder failures, bt_cosine absent
  double mean = 0;
  double fraction_below = 0;
  bool warn = false;  // mean < threshold
};

struct BackTranslationReport {
  double threshold = 0.93;
  std::map<std::string, LanguageBtStats> languages;
  nlohmann::json to_json() const;
};

// Fills back_translation and bt_cosine on each record in place.
BackTranslationReport audit_back_translation(std::vector<TranslationRecord>& records, gateway::ChatGateway& gateway,
                                             gateway::Embedder& embedder, double threshold = 0.93);

// Per-language aggregation of whatever bt_cosine values are present.
BackTranslationReport summarize_back_translation(const std::vector<TranslationRecord>& records,
                                                 double threshold = 0.93);

struct PreservationFailure {
  std::string query_id;
  std::string language;
  std::vector<std::string> missing;
};

struct TermPreservationReport {
  std::size_t checked = 0;  // TCQ records
  std::vector<PreservationFailure> failures;
  double pass_rate() const { return checked == 0 ? 1.0 : 1.0 - static_cast<double>(failures.size()) / checked; }
  nlohmann::json to_json() const;
};

TermPreservationReport audit_term_preservation(const std::vector<TranslationRecord>& records);

}  // namespace stella::xlingual
