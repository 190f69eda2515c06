#include "stella/benchmark.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "stella/error.hpp"
#include "stella/io.hpp"
#include "stella/text.hpp"

namespace stella::benchmark {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void sort_split(BeirSplit& s) {
  std::sort(s.corpus.begin(), s.corpus.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(s.queries.begin(), s.queries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(s.qrels.begin(), s.qrels.end(), [](const auto& a, const auto& b) {
    return std::tie(a.query_id, a.corpus_id) < std::tie(b.query_id, b.corpus_id);
  });
}

std::string field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorKind::parse, where + ": missing string field \"" + key + "\"");
  }
  return j[key].get<std::string>();
}

}  // namespace

std::vector<CorpusEntry> corpus_from_passages(const std::vector<chunker::Passage>& passages,
                                              const std::map<std::string, std::string>& titles) {
  std::vector<CorpusEntry> out;
  out.reserve(passages.size());
  for (const auto& p : passages) {
    auto it = titles.find(p.doc_id);
    out.push_back({p.passage_id, it == titles.end() ? std::string() : it->second, p.text});
  }
  return out;
}

json ExportReport::to_json() const {
  json out = json::object();
  for (const auto& [lang, l] : languages) {
    out[lang] = {{"queries", l.queries},
                 {"excluded_invalid", l.excluded_invalid},
                 {"excluded_preservation", l.excluded_preservation}};
  }
  return out;
}

void validate(const BeirSplit& split, const std::string& origin) {
  std::unordered_set<std::string> corpus_ids;
  for (const auto& c : split.corpus) {
    if (!corpus_ids.insert(c.id).second) {
      throw Error(ErrorKind::duplicate_id, origin + ": duplicate corpus id \"" + c.id + "\"");
    }
    if (c.text.empty()) throw Error(ErrorKind::parse, origin + ": corpus entry \"" + c.id + "\" has empty text");
  }
  std::unordered_set<std::string> query_ids;
  for (const auto& q : split.queries) {
    if (!query_ids.insert(q.id).second) {
      throw Error(ErrorKind::duplicate_id, origin + ": duplicate query id \"" + q.id + "\"");
    }
  }
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& r : split.qrels) {
    if (!query_ids.contains(r.query_id)) {
      throw Error(ErrorKind::dangling_qrel, origin + ": qrel names unknown query \"" + r.query_id + "\"");
    }
    if (!corpus_ids.contains(r.corpus_id)) {
      throw Error(ErrorKind::dangling_qrel, origin + ": qrel names unknown passage \"" + r.corpus_id + "\"");
    }
    if (!pairs.insert({r.query_id, r.corpus_id}).second) {
      throw Error(ErrorKind::duplicate_id,
                  origin + ": duplicate qrel \"" + r.query_id + "\" -> \"" + r.corpus_id + "\"");
    }
  }
}

std::map<std::string, BeirSplit> build_splits(const std::vector<CorpusEntry>& corpus,
                                              const std::vector<querygen::QueryRecord>& queries,
                                              const std::vector<xlingual::TranslationRecord>& translations,
                                              ExportReport* report) {
  ExportReport local;
  ExportReport& rep = report ? *report : local;
  rep.languages.clear();

  // passage id -> doc id, from the corpus passage ids ("<doc>#<ordinal>").
  auto doc_of = [](const std::string& passage_id) {
    const auto hash = passage_id.rfind('#');
    return hash == std::string::npos ? passage_id : passage_id.substr(0, hash);
  };

  std::map<std::string, BeirSplit> splits;
  std::unordered_map<std::string, const querygen::QueryRecord*> exported;
  auto& en = splits["en"];
  auto& en_rep = rep.languages["en"];
  for (const auto& q : queries) {
    if (q.language != "en") continue;
    if (!q.valid) {
      ++en_rep.excluded_invalid;
      continue;
    }
    if (exported.contains(q.query_id)) {
      throw Error(ErrorKind::duplicate_id, "en: duplicate query id \"" + q.query_id + "\"");
    }
    exported[q.query_id] = &q;
    en.queries.push_back({q.query_id, q.final_query,
                          {{"intent", selector::display_name(q.intent)},
                           {"qtype", querygen::to_string(q.qtype)},
                           {"language", "en"},
                           {"source_doc_id", doc_of(q.passage_id)}}});
    en.qrels.push_back({q.query_id, q.passage_id, 1});
  }
  en_rep.queries = en.queries.size();

  for (const auto& t : translations) {
    auto& split = splits[t.language];
    auto& lr = rep.languages[t.language];
    auto it = exported.find(t.query_id);
    if (it == exported.end()) {
      ++lr.excluded_invalid;
      continue;
    }
    if (t.qtype == querygen::QueryType::tcq && !xlingual::missing_terms(t.translated_query, t.kept_terms).empty()) {
      ++lr.excluded_preservation;
      continue;
    }
    const auto& q = *it->second;
    split.queries.push_back({t.query_id, t.translated_query,
                             {{"intent", selector::display_name(q.intent)},
                              {"qtype", querygen::to_string(q.qtype)},
                              {"language", t.language},
                              {"source_doc_id", doc_of(q.passage_id)}}});
    split.qrels.push_back({t.query_id, q.passage_id, 1});
    ++lr.queries;
  }

  for (auto& [lang, split] : splits) {
    split.corpus = corpus;
    sort_split(split);
    validate(split, lang);
  }
  return splits;
}

void write_split(const BeirSplit& split, const fs::path& dir) {
  std::string corpus;
  for (const auto& c : split.corpus) corpus += json{{"_id", c.id}, {"title", c.title}, {"text", c.text}}.dump() + "\n";
  std::string queries;
  for (const auto& q : split.queries) {
    queries += json{{"_id", q.id}, {"text", q.text}, {"metadata", q.metadata}}.dump() + "\n";
  }
  std::string qrels = std::string(kQrelsHeader) + "\n";
  for (const auto& r : split.qrels) qrels += r.query_id + "\t" + r.corpus_id + "\t" + std::to_string(r.score) + "\n";
  fs::create_directories(dir / "qrels");
  io::write_atomic(dir / "corpus.jsonl", corpus);
  io::write_atomic(dir / "queries.jsonl", queries);
  io::write_atomic(dir / "qrels" / "test.tsv", qrels);
}

ExportReport export_beir(const std::vector<CorpusEntry>& corpus, const std::vector<querygen::QueryRecord>& queries,
                         const std::vector<xlingual::TranslationRecord>& translations, const fs::path& out_dir) {
  ExportReport report;
  const auto splits = build_splits(corpus, queries, translations, &report);
  for (const auto& [lang, split] : splits) write_split(split, out_dir / lang);
  return report;
}

BeirSplit load_beir(const fs::path& dir) {
  BeirSplit s;
  const auto corpus_path = dir / "corpus.jsonl";
  io::for_each_jsonl(corpus_path, [&](std::size_t line, const json& j) {
    const auto where = corpus_path.string() + ":" + std::to_string(line);
    CorpusEntry c{field(j, "_id", where), "", field(j, "text", where)};
    if (j.contains("title") && j["title"].is_string()) c.title = j["title"].get<std::string>();
    s.corpus.push_back(std::move(c));
  });
  const auto queries_path = dir / "queries.jsonl";
  io::for_each_jsonl(queries_path, [&](std::size_t line, const json& j) {
    const auto where = queries_path.string() + ":" + std::to_string(line);
    QueryEntry q{field(j, "_id", where), field(j, "text", where), json::object()};
    if (j.contains("metadata") && j["metadata"].is_object()) q.metadata = j["metadata"];
    s.queries.push_back(std::move(q));
  });

  const auto qrels_path = dir / "qrels" / "test.tsv";
  std::istringstream in(io::read_file(qrels_path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    if (line_no == 1 && line == kQrelsHeader) continue;
    const auto cols = text::split(line, '\t');
    const auto where = qrels_path.string() + ":" + std::to_string(line_no);
    if (cols.size() != 3) throw Error(ErrorKind::parse, where + ": expected 3 tab-separated columns");
    int score = 0;
    const auto& sc = cols[2];
    auto [ptr, ec] = std::from_chars(sc.data(), sc.data() + sc.size(), score);
    if (ec != std::errc() || ptr != sc.data() + sc.size()) {
      throw Error(ErrorKind::parse, where + ": score \"" + sc + "\" is not an integer");
    }
    s.qrels.push_back({cols[0], cols[1], score});
  }
  sort_split(s);
  validate(s, dir.string());
  return s;
}

std::map<std::string, BeirSplit> load_benchmark(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::missing_artifact, root.string() + " is not a directory");
  std::map<std::string, BeirSplit> out;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "queries.jsonl")) {
      out.emplace(entry.path().filename().string(), load_beir(entry.path()));
    }
  }
  return out;
}

}  // namespace stella::benchmark
