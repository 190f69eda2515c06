#include "stella/xlingual.hpp"

#include <algorithm>
#include <sstream>

#include "stella/error.hpp"
#include "stella/io.hpp"
#include "stella/kernels/vector_ops.hpp"
#include "stella/resources.hpp"
#include "stella/text.hpp"

namespace stella::xlingual {

using nlohmann::json;

namespace {

const std::map<std::string, std::string, std::less<>>& language_names() {
  static const auto table = [] {
    std::map<std::string, std::string, std::less<>> out;
    std::istringstream in{std::string(resources::get("data/language_names.txt"))};
    for (std::string line; std::getline(in, line);) {
      if (line.empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      out.emplace(line.substr(0, tab), std::string(text::trim(line.substr(tab + 1))));
    }
    return out;
  }();
  return table;
}

std::string quoted_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& t : items) {
    if (!out.empty()) out += ", ";
    out += json(t).dump();
  }
  return out;
}

}  // namespace

bool is_target_language(std::string_view code) {
  return std::find(kTargetLanguages.begin(), kTargetLanguages.end(), code) != kTargetLanguages.end();
}

std::string language_name(std::string_view code) {
  const auto& names = language_names();
  auto it = names.find(code);
  if (it == names.end()) throw Error(ErrorKind::precondition, "unknown language code \"" + std::string(code) + "\"");
  return it->second;
}

json to_json(const TranslationRecord& r) {
  json j = {{"query_id", r.query_id},
            {"passage_id", r.passage_id},
            {"qtype", querygen::to_string(r.qtype)},
            {"language", r.language},
            {"source_query", r.source_query},
            {"translated_query", r.translated_query},
            {"kept_terms", r.kept_terms},
            {"term_check_passed", r.term_check_passed},
            {"repair_rounds", r.repair_rounds}};
  if (r.back_translation) j["back_translation"] = *r.back_translation;
  if (r.bt_cosine) j["bt_cosine"] = *r.bt_cosine;
  return j;
}

TranslationRecord translation_from_json(const json& j) {
  try {
    TranslationRecord r;
    r.query_id = j.at("query_id").get<std::string>();
    r.passage_id = j.value("passage_id", "");
    auto qt = querygen::parse_query_type(j.at("qtype").get<std::string>());
    if (!qt) throw Error(ErrorKind::parse, "unknown qtype " + j.at("qtype").dump());
    r.qtype = *qt;
    r.language = j.at("language").get<std::string>();
    r.source_query = j.value("source_query", "");
    r.translated_query = j.at("translated_query").get<std::string>();
    r.kept_terms = j.value("kept_terms", std::vector<std::string>{});
    if (j.contains("back_translation")) r.back_translation = j["back_translation"].get<std::string>();
    if (j.contains("bt_cosine")) r.bt_cosine = j["bt_cosine"].get<double>();
    r.term_check_passed = j.value("term_check_passed", true);
    r.repair_rounds = j.value("repair_rounds", std::size_t{0});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("translation record: ") + e.what());
  }
}

std::vector<TranslationRecord> load_translations(const std::filesystem::path& path) {
  std::vector<TranslationRecord> out;
  io::for_each_jsonl(path, [&](std::size_t line, const json& j) {
    try {
      out.push_back(translation_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

std::vector<std::string> kept_terms_for(std::string_view query, const terms::TerminologyDictionary& dict) {
  std::vector<std::string> out;
  for (const auto& m : dict.find_terms_in(query)) {
    std::string span(query.substr(m.begin, m.end - m.begin));
    if (std::find(out.begin(), out.end(), span) == out.end()) out.push_back(std::move(span));
  }
  return out;
}

std::vector<std::string> missing_terms(std::string_view translated, const std::vector<std::string>& kept) {
  std::vector<std::string> out;
  for (const auto& t : kept) {
    if (translated.find(t) == std::string_view::npos) out.push_back(t);
  }
  return out;
}

std::string clean_translation(std::string_view model_text) {
  std::istringstream in{std::string(model_text)};
  std::string line;
  std::string_view s;
  std::string first;
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) {
      first = line;
      break;
    }
  }
  s = text::trim(first);
  for (std::string_view label : {"Output:", "Translation:", "Translated text:"}) {
    if (text::starts_with_icase(s, label)) {
      s = text::trim(s.substr(label.size()));
      break;
    }
  }
  // Straight or typographic double quotes around the whole answer.
  auto strip = [&](std::string_view open, std::string_view close) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
      s = text::trim(s.substr(open.size(), s.size() - open.size() - close.size()));
    }
  };
  strip("\"", "\"");
  strip("“", "”");
  strip("「", "」");
  return std::string(s);
}

TranslationRecord translate_query(const querygen::QueryRecord& record, std::string_view lang,
                                  const terms::TerminologyDictionary& dict, gateway::ChatGateway& gateway,
                                  const TranslateConfig& cfg) {
  require(record.language == "en", "translate_query: " + record.query_id + " is not an English query");
  require(is_target_language(lang), "translate_query: unsupported target language \"" + std::string(lang) + "\"");

  TranslationRecord out;
  out.query_id = record.query_id;
  out.passage_id = record.passage_id;
  out.qtype = record.qtype;
  out.language = std::string(lang);
  out.source_query = record.final_query;

  std::string keep_instruction;
  if (record.qtype == querygen::QueryType::tcq) {
    out.kept_terms = kept_terms_for(record.final_query, dict);
    keep_instruction = text::fill_template(text::trim(resources::get("prompts/keep_terms_tcq.txt")),
                                           {{"term_list", quoted_list(out.kept_terms)}});
  } else {
    keep_instruction = std::string(text::trim(resources::get("prompts/keep_terms_taq.txt")));
  }

  const auto name = language_name(lang);
  const auto tmpl = resources::prompt("translation");
  const auto fewshot = std::string(text::trim(resources::get("prompts/fewshot/" + std::string(lang) + ".txt")));
  gateway::ChatRequest req;
  req.system_prompt = text::fill_template(tmpl.system, {{"target_language_name", name}});
  const auto base_user = text::fill_template(tmpl.user, {{"few_shot_examples", fewshot},
                                                         {"target_language_name", name},
                                                         {"keep_terms_instruction", keep_instruction},
                                                         {"input_query", record.final_query}});
  req.user_prompt = base_user;
  req.temperature = cfg.temperature;
  req.max_output_tokens = 512;

  for (std::size_t round = 0;; ++round) {
    out.translated_query = clean_translation(gateway.chat(req));
    out.repair_rounds = round;
    const auto missing = missing_terms(out.translated_query, out.kept_terms);
    out.term_check_passed = missing.empty();
    if (missing.empty() || round == cfg.max_repairs) break;
    req.user_prompt = base_user + text::fill_template(resources::get("prompts/translation_repair.txt"),
                                                      {{"missing_terms", quoted_list(missing)},
                                                       {"previous_output", out.translated_query}});
  }
  return out;
}

json BackTranslationReport::to_json() const {
  json langs = json::object();
  for (const auto& [code, s] : languages) {
    langs[code] = {{"records", s.records}, {"scored", s.scored},          {"errors", s.errors},
                   {"mean", s.mean},       {"fraction_below", s.fraction_below}, {"warn", s.warn}};
  }
  return {{"threshold", threshold}, {"languages", langs}};
}

BackTranslationReport summarize_back_translation(const std::vector<TranslationRecord>& records, double threshold) {
  BackTranslationReport report;
  report.threshold = threshold;
  std::map<std::string, std::size_t> below;
  for (const auto& r : records) {
    auto& s = report.languages[r.language];
    ++s.records;
    if (!r.bt_cosine) {
      ++s.errors;
      continue;
    }
    ++s.scored;
    s.mean += *r.bt_cosine;
    if (*r.bt_cosine < threshold) ++below[r.language];
  }
  for (auto& [code, s] : report.languages) {
    if (s.scored == 0) continue;
    s.mean /= static_cast<double>(s.scored);
    s.fraction_below = static_cast<double>(below[code]) / static_cast<double>(s.scored);
    s.warn = s.mean < threshold;
  }
  return report;
}

BackTranslationReport audit_back_translation(std::vector<TranslationRecord>& records, gateway::ChatGateway& gateway,
                                             gateway::Embedder& embedder, double threshold) {
  const auto tmpl = resources::prompt("back_translation");
  for (auto& r : records) {
    r.back_translation.reset();
    r.bt_cosine.reset();
    try {
      const auto name = language_name(r.language);
      gateway::ChatRequest req;
      req.system_prompt = text::fill_template(tmpl.system, {{"source_language_name", name}});
      req.user_prompt =
          text::fill_template(tmpl.user, {{"source_language_name", name}, {"input_query", r.translated_query}});
      req.temperature = 0.0;
      req.max_output_tokens = 512;
      auto back = clean_translation(gateway.chat(req));
      auto vectors = embedder.embed({r.source_query, back});
      r.back_translation = std::move(back);
      r.bt_cosine = kernels::cosine(vectors[0].values, vectors[1].values);
    } catch (const Error&) {
      // Counted as an error in the report.
    }
  }
  return summarize_back_translation(records, threshold);
}

json TermPreservationReport::to_json() const {
  json fails = json::array();
  for (const auto& f : failures) {
    fails.push_back({{"query_id", f.query_id}, {"language", f.language}, {"missing", f.missing}});
  }
  return {{"checked", checked}, {"failures", fails}, {"pass_rate", pass_rate()}};
}

TermPreservationReport audit_term_preservation(const std::vector<TranslationRecord>& records) {
  TermPreservationReport report;
  for (const auto& r : records) {
    if (r.qtype != querygen::QueryType::tcq) continue;
    ++report.checked;
    auto missing = missing_terms(r.translated_query, r.kept_terms);
    if (!missing.empty()) report.failures.push_back({r.query_id, r.language, std::move(missing)});
  }
  return report;
}

}  // namespace stella::xlingual
