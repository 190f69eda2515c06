#include "stella/querygen.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include "stella/error.hpp"
#include "stella/io.hpp"
#include "stella/resources.hpp"
#include "stella/text.hpp"

namespace stella::querygen {

using nlohmann::json;

namespace {

constexpr std::size_t kMinQueryTokens = 15;
constexpr std::size_t kMaxQueryTokens = 25;
constexpr std::size_t kMaxEntities = 2;
constexpr std::size_t kMaxEntityWords = 3;

const std::set<std::string>& abbreviations() {
  static const std::set<std::string> table = [] {
    std::set<std::string> out;
    std::istringstream in{std::string(resources::get("data/abbreviations.txt"))};
    for (std::string line; std::getline(in, line);) {
      auto t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      out.insert(text::to_lower(t));
    }
    return out;
  }();
  return table;
}

std::size_t word_count(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

bool is_word_char(char c) { return text::is_ascii_alpha(c) || text::is_ascii_digit(c); }

// Case-sensitive occurrence with non-alphanumeric neighbours.
bool contains_verbatim(std::string_view haystack, std::string_view term) {
  if (term.empty()) return false;
  for (auto pos = haystack.find(term); pos != std::string_view::npos; pos = haystack.find(term, pos + 1)) {
    const bool left = pos == 0 || !is_word_char(haystack[pos - 1]);
    const auto end = pos + term.size();
    const bool right = end >= haystack.size() || !is_word_char(haystack[end]);
    if (left && right) return true;
  }
  return false;
}

std::string lower_trim(std::string_view s) { return text::to_lower(text::trim(s)); }

bool contains_icase(const std::vector<std::string>& list, std::string_view item) {
  const auto key = lower_trim(item);
  return std::any_of(list.begin(), list.end(), [&](const auto& x) { return lower_trim(x) == key; });
}

std::string step_key(int s) { return "step_" + std::to_string(s); }

json step_to_json(const CoDStep& s) {
  json j = {{"query", s.query},
            {"recognized_entities", s.recognized_entities},
            {"entities_added", s.entities_added},
            {"self_feedback", s.self_feedback}};
  if (s.descriptions_referenced) j["descriptions_referenced"] = *s.descriptions_referenced;
  return j;
}

std::optional<std::vector<std::string>> string_list(const json& j) {
  if (!j.is_array()) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& x : j) {
    if (!x.is_string()) return std::nullopt;
    out.push_back(x.get<std::string>());
  }
  return out;
}

}  // namespace

json to_json(const TermDescription& d) {
  return {{"term", d.term},
          {"description", d.description},
          {"context_span", {d.context_start, d.context_end}},
          {"undefinable", d.undefinable}};
}

TermDescription term_description_from_json(const json& j) {
  TermDescription d;
  d.term = j.at("term").get<std::string>();
  d.description = j.value("description", "");
  if (j.contains("context_span")) {
    d.context_start = j["context_span"].at(0).get<std::size_t>();
    d.context_end = j["context_span"].at(1).get<std::size_t>();
  }
  d.undefinable = j.value("undefinable", false);
  return d;
}

DescribedTerms describe_terms(const selector::CandidatePassage& passage,
                              const std::vector<chunker::Passage>& doc_passages, gateway::ChatGateway& gateway,
                              std::size_t w) {
  require(!passage.distinct_terms.empty(), "describe_terms: passage " + passage.passage.passage_id +
                                               " has no terms");
  const auto c = passage.passage.ordinal;
  const auto lo = c >= w ? c - w : 0;
  const auto hi = c + w;
  std::vector<const chunker::Passage*> window;
  for (const auto& p : doc_passages) {
    if (p.doc_id == passage.passage.doc_id && p.ordinal >= lo && p.ordinal <= hi) window.push_back(&p);
  }
  std::sort(window.begin(), window.end(), [](auto* a, auto* b) { return a->ordinal < b->ordinal; });
  std::string context;
  std::size_t start = c, end = c;
  if (window.empty()) {
    context = passage.passage.text;
  } else {
    start = window.front()->ordinal;
    end = window.back()->ordinal;
    for (const auto* p : window) {
      if (!context.empty()) context += "\n\n";
      context += p->text;
    }
  }

  const auto tmpl = resources::prompt("term_description");
  DescribedTerms out;
  for (const auto& term : passage.distinct_terms) {
    gateway::ChatRequest req;
    req.system_prompt = text::fill_template(tmpl.system, {{"term", term}});
    req.user_prompt = text::fill_template(tmpl.user, {{"term", term}, {"context_text", context}});
    req.temperature = 0.0;
    req.max_output_tokens = 128;
    std::string answer;
    try {
      answer = gateway.chat(req);
    } catch (const Error&) {
      out.dropped.push_back(term);
      continue;
    }
    std::string_view a = text::trim(answer);
    while (!a.empty() && (a.front() == '"' || a.front() == '\'')) a.remove_prefix(1);
    while (!a.empty() && (a.back() == '"' || a.back() == '\'')) a.remove_suffix(1);
    a = text::trim(a);
    std::string_view bare = a;
    while (!bare.empty() && (bare.back() == '.' || bare.back() == '!')) bare.remove_suffix(1);
    TermDescription d{term, std::string(a), start, end, false};
    if (a.empty() || text::iequals(bare, kUndefinable)) {
      out.undefinable.push_back(term);
      continue;
    }
    out.defined.push_back(std::move(d));
  }
  out.taq_skipped = out.defined.size() < 2;
  return out;
}

std::vector<TermDescription> tcq_terms(const selector::CandidatePassage& passage, const DescribedTerms& described) {
  auto terms = described.defined;
  for (const auto& t : passage.distinct_terms) {
    if (terms.size() >= 2) break;
    if (std::none_of(terms.begin(), terms.end(), [&](const auto& d) { return d.term == t; })) {
      terms.push_back({t, "", passage.passage.ordinal, passage.passage.ordinal, false});
    }
  }
  return terms;
}

std::string_view to_string(QueryType t) { return t == QueryType::tcq ? "TCQ" : "TAQ"; }

std::optional<QueryType> parse_query_type(std::string_view s) {
  if (text::iequals(s, "TCQ")) return QueryType::tcq;
  if (text::iequals(s, "TAQ")) return QueryType::taq;
  return std::nullopt;
}

std::string query_id(std::string_view passage_id, QueryType t) {
  return std::string(passage_id) + (t == QueryType::tcq ? ":tcq" : ":taq");
}

json to_json(const QueryRecord& r) {
  json trace = json::array();
  for (const auto& s : r.trace) trace.push_back(step_to_json(s));
  json terms = json::array();
  for (const auto& t : r.identified_terms) terms.push_back(to_json(t));
  return {{"query_id", r.query_id},
          {"passage_id", r.passage_id},
          {"qtype", to_string(r.qtype)},
          {"intent", selector::display_name(r.intent)},
          {"language", r.language},
          {"final_query", r.final_query},
          {"reported_intention", r.reported_intention},
          {"trace", trace},
          {"identified_terms", terms},
          {"repair_rounds", r.repair_rounds},
          {"valid", r.valid},
          {"violations", r.violations}};
}

QueryRecord query_record_from_json(const json& j) {
  try {
    QueryRecord r;
    r.query_id = j.at("query_id").get<std::string>();
    r.passage_id = j.at("passage_id").get<std::string>();
    auto qt = parse_query_type(j.at("qtype").get<std::string>());
    if (!qt) throw Error(ErrorKind::parse, "unknown qtype " + j.at("qtype").dump());
    r.qtype = *qt;
    auto intent = selector::parse_intent_name(j.at("intent").get<std::string>());
    if (!intent) throw Error(ErrorKind::parse, "unknown intent " + j.at("intent").dump());
    r.intent = *intent;
    r.language = j.value("language", "en");
    r.final_query = j.at("final_query").get<std::string>();
    r.reported_intention = j.value("reported_intention", "");
    const auto& trace = j.at("trace");
    if (!trace.is_array() || trace.size() != 3) throw Error(ErrorKind::parse, "trace must hold 3 steps");
    for (std::size_t s = 0; s < 3; ++s) {
      const auto& t = trace[s];
      auto& step = r.trace[s];
      step.query = t.at("query").get<std::string>();
      step.recognized_entities = t.at("recognized_entities").get<std::vector<std::string>>();
      step.entities_added = t.at("entities_added").get<std::vector<std::string>>();
      step.self_feedback = t.value("self_feedback", "");
      if (t.contains("descriptions_referenced")) {
        step.descriptions_referenced = t["descriptions_referenced"].get<std::vector<std::string>>();
      }
    }
    for (const auto& t : j.value("identified_terms", json::array())) {
      r.identified_terms.push_back(term_description_from_json(t));
    }
    r.repair_rounds = j.value("repair_rounds", std::size_t{0});
    r.valid = j.value("valid", true);
    r.violations = j.value("violations", std::vector<std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("query record: ") + e.what());
  }
}

std::vector<QueryRecord> load_queries(const std::filesystem::path& path) {
  std::vector<QueryRecord> out;
  io::for_each_jsonl(path, [&](std::size_t line, const json& j) {
    try {
      out.push_back(query_record_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

std::string_view to_string(Constraint c) {
  switch (c) {
    case Constraint::schema: return "schema";
    case Constraint::forbidden_form: return "forbidden_form";
    case Constraint::sentence_length: return "sentence_length";
    case Constraint::intention: return "intention";
    case Constraint::term_usage: return "term_usage";
    case Constraint::entity_granularity: return "entity_granularity";
    case Constraint::step1_reservation: return "step1_reservation";
  }
  return "";
}

std::string Violation::render() const {
  return (step == 0 ? std::string("output") : step_key(step)) + " [" + std::string(to_string(constraint)) + "] " +
         message;
}

std::optional<std::string> forbidden_form(std::string_view query) {
  static const std::regex yes_no(
      R"(^\s*(is|are|was|were|am|do|does|did|can|could|will|would|should|shall|has|have|had|may|might|must)\b)",
      std::regex::icase);
  static const std::regex list_request(
      R"(^\s*(list|enumerate|quote|cite|name)\b|\b(list|enumerate|quote|cite)\s+(all|every|each|the|any|some)\b|\bverbatim\b)",
      std::regex::icase);
  // A demonstrative followed by punctuation, the end, or a function word /
  // verb rather than a noun.
  static const std::regex deictic(
      R"(\b(this|these|those)\b\s*([?.!,;:]|$|(is|are|was|were|be|been|does|do|did|can|could|will|would|has|have|had|and|or|of|in|on|to|for|with|by|at|from|affect|affects|mean|means|work|works|happen|happens)\b)|\bthat\s*([?.!,;:]|$))",
      std::regex::icase);
  const std::string q(query);
  if (std::regex_search(q, yes_no)) return "yes/no question opener";
  if (std::regex_search(q, list_request)) return "list or quote request";
  if (q.find('"') != std::string::npos) return "quotation marks";
  if (std::regex_search(q, deictic)) return "bare deictic";
  return std::nullopt;
}

std::size_t terminal_marks(std::string_view q) {
  std::size_t marks = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const char c = q[i];
    if (c != '.' && c != '?' && c != '!') continue;
    // A run like "?!" or "..." counts once.
    if (i > 0 && (q[i - 1] == '.' || q[i - 1] == '?' || q[i - 1] == '!')) continue;
    if (c == '.') {
      if (i > 0 && i + 1 < q.size() && text::is_ascii_digit(q[i - 1]) && text::is_ascii_digit(q[i + 1])) continue;
      auto start = q.rfind(' ', i);
      start = start == std::string_view::npos ? 0 : start + 1;
      auto word = text::to_lower(q.substr(start, i + 1 - start));
      while (!word.empty() && (word.front() == '(' || word.front() == '[')) word.erase(0, 1);
      if (abbreviations().contains(word)) continue;
      // Dotted initialisms ("U.S.") and mid-token dots ("v1.2b") are not sentence ends.
      if (i + 1 < q.size() && !std::isspace(static_cast<unsigned char>(q[i + 1]))) continue;
    }
    ++marks;
  }
  return marks;
}

std::vector<Violation> parse_trace(std::string_view model_json, QueryRecord& record) {
  std::vector<Violation> v;
  json j;
  try {
    j = json::parse(model_json);
  } catch (const json::exception& e) {
    v.push_back({Constraint::schema, 0, std::string("output is not one JSON object: ") + e.what()});
    return v;
  }
  if (!j.is_object()) {
    v.push_back({Constraint::schema, 0, "output is not one JSON object"});
    return v;
  }
  if (j.contains("intention") && j["intention"].is_string()) {
    record.reported_intention = j["intention"].get<std::string>();
  } else {
    v.push_back({Constraint::schema, 0, "missing string field \"intention\""});
  }
  for (int s = 1; s <= 3; ++s) {
    auto& step = record.trace[static_cast<std::size_t>(s - 1)];
    step = {};
    if (!j.contains(step_key(s)) || !j[step_key(s)].is_object()) {
      v.push_back({Constraint::schema, s, "missing object \"" + step_key(s) + "\""});
      continue;
    }
    const auto& t = j[step_key(s)];
    if (t.contains("query") && t["query"].is_string()) {
      step.query = std::string(text::trim(t["query"].get<std::string>()));
    } else {
      v.push_back({Constraint::schema, s, "missing string field \"query\""});
    }
    for (auto [key, dest] : {std::pair{"recognized_entities", &step.recognized_entities},
                             std::pair{"entities_added", &step.entities_added}}) {
      auto list = t.contains(key) ? string_list(t[key]) : std::nullopt;
      if (list) {
        *dest = std::move(*list);
      } else {
        v.push_back({Constraint::schema, s, std::string("missing string array \"") + key + "\""});
      }
    }
    if (t.contains("self_feedback") && t["self_feedback"].is_string()) {
      step.self_feedback = t["self_feedback"].get<std::string>();
    } else {
      v.push_back({Constraint::schema, s, "missing string field \"self_feedback\""});
    }
    if (t.contains("descriptions_referenced")) {
      if (auto list = string_list(t["descriptions_referenced"])) {
        step.descriptions_referenced = std::move(*list);
      } else {
        v.push_back({Constraint::schema, s, "\"descriptions_referenced\" must be a string array"});
      }
    }
  }
  record.final_query = record.trace[2].query;
  return v;
}

std::vector<Violation> validate_constraints(const QueryRecord& record) {
  std::vector<Violation> v;
  if (!text::iequals(text::trim(record.reported_intention), selector::display_name(record.intent))) {
    v.push_back({Constraint::intention, 0,
                 "intention \"" + record.reported_intention + "\" differs from sampled \"" +
                     std::string(selector::display_name(record.intent)) + "\""});
  }

  std::vector<std::string> terms;
  for (const auto& t : record.identified_terms) terms.push_back(t.term);
  const terms::TermMatcher ban(terms::entries_from_surfaces(terms), terms::MatchMode::ban);
  auto banned_in = [&](std::string_view s) {
    std::vector<std::string> hits;
    for (const auto& m : ban.find(s)) hits.push_back(std::string(s.substr(m.begin, m.end - m.begin)));
    return hits;
  };

  std::vector<std::string> previous_added;
  for (int s = 1; s <= 3; ++s) {
    const auto& step = record.trace[static_cast<std::size_t>(s - 1)];
    const auto& q = step.query;

    if (q.empty()) {
      v.push_back({Constraint::schema, s, "empty query"});
      continue;
    }
    if (auto why = forbidden_form(q)) v.push_back({Constraint::forbidden_form, s, *why});
    const auto marks = terminal_marks(q);
    const char last = q.back();
    if (marks != 1 || (last != '?' && last != '.' && last != '!')) {
      v.push_back({Constraint::sentence_length, s,
                   "query must be exactly one sentence ending in . ? or !, found " + std::to_string(marks) +
                       " sentence terminators"});
    }
    const auto tokens = chunker::count_tokens(q);
    if (tokens < kMinQueryTokens || tokens > kMaxQueryTokens) {
      v.push_back({Constraint::sentence_length, s,
                   "query has " + std::to_string(tokens) + " tokens, needs " + std::to_string(kMinQueryTokens) +
                       "-" + std::to_string(kMaxQueryTokens)});
    }

    if (step.recognized_entities.size() > kMaxEntities) {
      v.push_back({Constraint::entity_granularity, s,
                   std::to_string(step.recognized_entities.size()) + " recognized_entities, maximum is 2"});
    }
    for (const auto* list : {&step.recognized_entities, &step.entities_added}) {
      for (const auto& e : *list) {
        const auto n = word_count(e);
        if (n == 0 || n > kMaxEntityWords) {
          v.push_back({Constraint::entity_granularity, s, "entity \"" + e + "\" must be 1-3 words"});
        }
      }
    }
    for (const auto& e : step.entities_added) {
      if (!contains_icase(step.recognized_entities, e)) {
        v.push_back({Constraint::entity_granularity, s, "added entity \"" + e + "\" is not in recognized_entities"});
      }
    }

    for (const auto& t : record.identified_terms) {
      if (word_count(t.description) >= 4 && text::to_lower(q).find(lower_trim(t.description)) != std::string::npos) {
        v.push_back({Constraint::term_usage, s, "query copies the description of \"" + t.term + "\""});
      }
    }

    if (s == 1) {
      std::vector<std::string> hits = banned_in(q);
      for (const auto* list : {&step.recognized_entities, &step.entities_added}) {
        for (const auto& e : *list) {
          for (auto& h : banned_in(e)) hits.push_back(std::move(h));
        }
      }
      for (const auto& h : hits) {
        v.push_back({Constraint::step1_reservation, s, "identified term \"" + h + "\" used in step 1"});
      }
      continue;
    }

    if (record.qtype == QueryType::tcq) {
      std::vector<std::string> added_terms;
      for (const auto& e : step.entities_added) {
        if (contains_icase(terms, e)) added_terms.push_back(e);
      }
      if (added_terms.empty()) {
        v.push_back({Constraint::term_usage, s, "entities_added names no identified term"});
      }
      for (const auto& e : added_terms) {
        // Verbatim means the term's own spelling.
        const auto it = std::find_if(terms.begin(), terms.end(), [&](const auto& t) { return text::iequals(t, text::trim(e)); });
        if (!contains_verbatim(q, *it)) {
          v.push_back({Constraint::term_usage, s, "added term \"" + *it + "\" is not in the query verbatim"});
        }
      }
      if (s == 3 && !added_terms.empty() &&
          std::all_of(added_terms.begin(), added_terms.end(),
                      [&](const auto& e) { return contains_icase(previous_added, e); })) {
        v.push_back({Constraint::term_usage, s, "step 3 must add a different identified term than step 2"});
      }
      previous_added = added_terms;
    } else {
      for (const auto& h : banned_in(q)) {
        v.push_back({Constraint::term_usage, s, "banned term \"" + h + "\" in query"});
      }
      const auto& refs = step.descriptions_referenced;
      if (!refs || refs->empty()) {
        v.push_back({Constraint::schema, s, "missing \"descriptions_referenced\""});
      } else if (std::none_of(refs->begin(), refs->end(), [&](const auto& r) { return contains_icase(terms, r); })) {
        v.push_back({Constraint::term_usage, s, "descriptions_referenced names no identified term"});
      }
    }
  }
  return v;
}

QueryRecord generate_query(QueryType type, const selector::CandidatePassage& passage,
                           const std::vector<TermDescription>& terms, gateway::ChatGateway& gateway,
                           const GenerationConfig& cfg) {
  require(terms.size() >= 2, "query generation needs at least 2 terms for " + passage.passage.passage_id);
  QueryRecord record;
  record.query_id = query_id(passage.passage.passage_id, type);
  record.passage_id = passage.passage.passage_id;
  record.qtype = type;
  record.intent = passage.intent;
  record.identified_terms = terms;

  json input = {{"passage_text", passage.passage.text},
                {"identified_terms", json::array()},
                {"sampled_intention", selector::display_name(passage.intent)}};
  for (const auto& t : terms) input["identified_terms"].push_back({{"term", t.term}, {"description", t.description}});

  const auto tmpl = resources::prompt(type == QueryType::tcq ? "tcqg" : "taqg");
  gateway::ChatRequest req;
  req.system_prompt = tmpl.system;
  const auto base_user = text::fill_template(tmpl.user, {{"input_json", input.dump(2)}});
  req.user_prompt = base_user;
  req.temperature = cfg.temperature;
  req.response_format = gateway::ResponseFormat::json_object;

  for (std::size_t round = 0;; ++round) {
    const auto answer = gateway.chat(req);
    auto violations = parse_trace(answer, record);
    if (violations.empty()) violations = validate_constraints(record);
    record.repair_rounds = round;
    record.violations.clear();
    if (violations.empty()) {
      record.valid = true;
      return record;
    }
    for (const auto& v : violations) record.violations.push_back(v.render());
    if (round == cfg.max_repairs) break;
    std::string listing;
    for (const auto& line : record.violations) listing += "- " + line + "\n";
    req.user_prompt = base_user + text::fill_template(resources::get("prompts/repair.txt"),
                                                      {{"violations", listing}, {"previous_output", answer}});
  }
  record.valid = false;
  return record;
}

QueryRecord generate_tcq(const selector::CandidatePassage& passage, const std::vector<TermDescription>& terms,
                         gateway::ChatGateway& gateway, const GenerationConfig& cfg) {
  return generate_query(QueryType::tcq, passage, terms, gateway, cfg);
}

QueryRecord generate_taq(const selector::CandidatePassage& passage, const std::vector<TermDescription>& terms,
                         gateway::ChatGateway& gateway, const GenerationConfig& cfg) {
  return generate_query(QueryType::taq, passage, terms, gateway, cfg);
}

QualityScore parse_quality(std::string_view model_json) {
  json j;
  try {
    j = json::parse(model_json);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_score, std::string("judge output is not JSON: ") + e.what());
  }
  QualityScore s;
  std::array<double*, 5> fields = {&s.answerability, &s.no_external_knowledge, &s.intent_adherence,
                                   &s.format_compliance, &s.style_length};
  double sum = 0;
  for (std::size_t i = 0; i < kQualityMetrics.size(); ++i) {
    const std::string key(kQualityMetrics[i]);
    if (!j.is_object() || !j.contains(key) || !j[key].is_number()) {
      throw Error(ErrorKind::invalid_score, "judge output lacks numeric \"" + key + "\"");
    }
    const double x = j[key].get<double>();
    if (!(x >= 1.0 && x <= 5.0)) {
      throw Error(ErrorKind::invalid_score, "\"" + key + "\" = " + j[key].dump() + " is outside [1, 5]");
    }
    *fields[i] = x;
    sum += x;
  }
  s.mean = sum / 5.0;
  return s;
}

QualityScore judge_quality(const QueryRecord& record, std::string_view passage_text, gateway::ChatGateway& gateway) {
  const auto tmpl = resources::prompt("judge");
  gateway::ChatRequest req;
  req.system_prompt = tmpl.system;
  req.user_prompt = text::fill_template(tmpl.user, {{"intention", std::string(selector::display_name(record.intent))},
                                                    {"passage_text", std::string(passage_text)},
                                                    {"query", record.final_query}});
  req.temperature = 0.0;
  req.max_output_tokens = 256;
  req.response_format = gateway::ResponseFormat::json_object;
  return parse_quality(gateway.chat(req));
}

json to_json(const QualityScore& s) {
  return {{"answerability", s.answerability},
          {"no_external_knowledge", s.no_external_knowledge},
          {"intent_adherence", s.intent_adherence},
          {"format_compliance", s.format_compliance},
          {"style_length", s.style_length},
          {"mean", s.mean}};
}

}  // namespace stella::querygen
