#include "stella/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "stella/error.hpp"
#include "stella/io.hpp"
#include "stella/kernels/vector_ops.hpp"
#include "stella/parallel.hpp"
#include "stella/text.hpp"

namespace stella::eval {

using nlohmann::json;

namespace {

bool all_punctuation(std::string_view token) {
  std::size_t pos = 0;
  while (pos < token.size()) {
    if (!chunker::is_punctuation(text::next_code_point(token, pos))) return false;
  }
  return true;
}

bool hit_before(const Hit& a, const Hit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.passage_id < b.passage_id;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

std::string meta_string(const json& metadata, const char* key) {
  if (metadata.is_object() && metadata.contains(key) && metadata[key].is_string()) return metadata[key].get<std::string>();
  return {};
}

}  // namespace

std::vector<std::string> analyze(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : chunker::token_strings(text)) {
    if (!all_punctuation(t)) out.push_back(text::to_lower(t));
  }
  return out;
}

Bm25Index::Bm25Index(const std::vector<Doc>& docs, Bm25Params params) : params_(params) {
  ids_.reserve(docs.size());
  lengths_.reserve(docs.size());
  double total = 0;
  for (std::uint32_t d = 0; d < docs.size(); ++d) {
    if (!id_index_.emplace(docs[d].id, d).second) {
      throw Error(ErrorKind::duplicate_id, "BM25 index: duplicate passage id \"" + docs[d].id + "\"");
    }
    ids_.push_back(docs[d].id);
    const auto tokens = analyze(docs[d].text);
    lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total += static_cast<double>(tokens.size());
    std::unordered_map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (auto& [term, count] : tf) postings_[term].push_back({d, count});
  }
  avgdl_ = docs.empty() ? 0.0 : total / static_cast<double>(docs.size());
}

Bm25Index Bm25Index::from_corpus(const std::vector<benchmark::CorpusEntry>& corpus, Bm25Params params) {
  std::vector<Doc> docs;
  docs.reserve(corpus.size());
  for (const auto& c : corpus) docs.push_back({c.id, c.title.empty() ? c.text : c.title + "\n" + c.text});
  return Bm25Index(docs, params);
}

double Bm25Index::idf(const std::string& term) const {
  const double n = static_cast<double>(ids_.size());
  const double df = static_cast<double>(doc_frequency(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::size_t Bm25Index::doc_frequency(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

std::size_t Bm25Index::doc_length(std::string_view passage_id) const {
  auto it = id_index_.find(std::string(passage_id));
  if (it == id_index_.end()) throw Error(ErrorKind::unknown_passage, "unknown passage \"" + std::string(passage_id) + "\"");
  return lengths_[it->second];
}

double Bm25Index::score(const std::vector<std::string>& query_tokens, std::string_view passage_id) const {
  auto it = id_index_.find(std::string(passage_id));
  if (it == id_index_.end()) throw Error(ErrorKind::unknown_passage, "unknown passage \"" + std::string(passage_id) + "\"");
  const auto d = it->second;
  const double norm = params_.k1 * (1.0 - params_.b + params_.b * lengths_[d] / avgdl_);
  double s = 0;
  for (const auto& t : query_tokens) {
    auto p = postings_.find(t);
    if (p == postings_.end()) continue;
    auto hit = std::lower_bound(p->second.begin(), p->second.end(), d,
                                [](const Posting& x, std::uint32_t doc) { return x.doc < doc; });
    if (hit == p->second.end() || hit->doc != d) continue;
    const double tf = hit->tf;
    s += idf(t) * tf * (params_.k1 + 1.0) / (tf + norm);
  }
  return s;
}

Ranking Bm25Index::search(std::string_view query, std::size_t cutoff) const {
  // Query terms are summed once per occurrence, matching score().
  std::unordered_map<std::uint32_t, double> acc;
  for (const auto& t : analyze(query)) {
    auto p = postings_.find(t);
    if (p == postings_.end()) continue;
    const double w = idf(t);
    for (const auto& [d, tf] : p->second) {
      const double norm = params_.k1 * (1.0 - params_.b + params_.b * lengths_[d] / avgdl_);
      acc[d] += w * tf * (params_.k1 + 1.0) / (tf + norm);
    }
  }
  std::vector<Hit> hits;
  hits.reserve(acc.size());
  for (const auto& [d, s] : acc) hits.push_back({ids_[d], s});
  return top_k(std::move(hits), cutoff);
}

DenseIndex::DenseIndex(std::vector<std::string> ids, const std::vector<std::vector<double>>& vectors)
    : ids_(std::move(ids)) {
  require(ids_.size() == vectors.size(), "dense index: ids and vectors differ in length");
  dim_ = vectors.empty() ? 0 : vectors[0].size();
  unit_.reserve(vectors.size() * dim_);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim_) {
      throw Error(ErrorKind::dimension_mismatch, "corpus vector " + ids_[i] + " has dimension " +
                                                     std::to_string(vectors[i].size()) + ", expected " +
                                                     std::to_string(dim_));
    }
    unit_.insert(unit_.end(), vectors[i].begin(), vectors[i].end());
    kernels::normalize(std::span<double>(unit_.data() + i * dim_, dim_));
  }
}

Ranking DenseIndex::search(const std::vector<double>& query, std::size_t cutoff) const {
  if (query.size() != dim_) {
    throw Error(ErrorKind::dimension_mismatch,
                "query dimension " + std::to_string(query.size()) + " differs from corpus " + std::to_string(dim_));
  }
  std::vector<double> q(query);
  kernels::normalize(q);
  std::vector<double> sims(ids_.size());
  kernels::dot_rows(q, unit_, sims);
  std::vector<Hit> hits;
  hits.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) hits.push_back({ids_[i], std::clamp(sims[i], -1.0, 1.0)});
  return top_k(std::move(hits), cutoff);
}

Ranking top_k(std::vector<Hit> hits, std::size_t cutoff) {
  if (hits.size() > cutoff) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<long>(cutoff), hits.end(), hit_before);
    hits.resize(cutoff);
  } else {
    std::sort(hits.begin(), hits.end(), hit_before);
  }
  return hits;
}

RunResult run_bm25(const Bm25Index& index, const std::vector<benchmark::QueryEntry>& queries, std::size_t cutoff,
                   std::size_t workers) {
  std::vector<Ranking> rankings(queries.size());
  auto errors = parallel_for(queries.size(), workers,
                             [&](std::size_t i) { rankings[i] = index.search(queries[i].text, cutoff); });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  RunResult run;
  for (std::size_t i = 0; i < queries.size(); ++i) run[queries[i].id] = std::move(rankings[i]);
  return run;
}

RunResult run_dense(gateway::Embedder& embedder, const std::vector<benchmark::CorpusEntry>& corpus,
                    const std::vector<benchmark::QueryEntry>& queries, std::size_t cutoff,
                    const std::string& query_prefix, const std::string& passage_prefix) {
  std::vector<std::string> ids, texts;
  for (const auto& c : corpus) {
    ids.push_back(c.id);
    texts.push_back(passage_prefix + (c.title.empty() ? c.text : c.title + "\n" + c.text));
  }
  std::vector<std::vector<double>> vectors;
  for (auto& v : embedder.embed_all(texts)) vectors.push_back(std::move(v.values));
  const DenseIndex index(std::move(ids), vectors);

  std::vector<std::string> qtexts;
  for (const auto& q : queries) qtexts.push_back(query_prefix + q.text);
  const auto qvecs = embedder.embed_all(qtexts);
  RunResult run;
  for (std::size_t i = 0; i < queries.size(); ++i) run[queries[i].id] = index.search(qvecs[i].values, cutoff);
  return run;
}

Qrels qrels_from(const std::vector<benchmark::Qrel>& qrels) {
  Qrels out;
  for (const auto& q : qrels) out[q.query_id][q.corpus_id] = q.score;
  return out;
}

double ndcg_at_k(const Ranking& ranking, const std::map<std::string, int>& relevant, std::size_t k) {
  double dcg = 0;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
    const auto& id = ranking[i].passage_id;
    if (!seen.insert(id).second) continue;  // a repeated passage earns nothing
    auto it = relevant.find(id);
    if (it != relevant.end() && it->second > 0) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  std::size_t positives = 0;
  for (const auto& [id, rel] : relevant) positives += rel > 0 ? 1 : 0;
  double idcg = 0;
  for (std::size_t i = 0; i < std::min(k, positives); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return idcg == 0 ? 0.0 : dcg / idcg;
}

Evaluation evaluate(const RunResult& run, const Qrels& qrels, std::size_t k) {
  Evaluation e;
  std::vector<double> values;
  for (const auto& [qid, ranking] : run) {
    auto it = qrels.find(qid);
    if (it == qrels.end()) throw Error(ErrorKind::missing_qrels, "no qrels for query \"" + qid + "\"");
    const double v = ndcg_at_k(ranking, it->second, k);
    e.per_query[qid] = v;
    values.push_back(v);
  }
  e.mean = mean_of(values);
  return e;
}

MetricReport build_report(const std::map<std::string, SplitScores>& splits, const std::string& retriever,
                          std::size_t k, const std::string& primary) {
  MetricReport r;
  r.retriever = retriever;
  r.k = k;
  r.primary_language = splits.contains(primary) || splits.empty() ? primary : splits.begin()->first;

  for (const auto& [lang, split] : splits) {
    std::vector<double> all, tcq, taq;
    std::map<std::string, std::vector<double>> cells;
    for (const auto& q : split.queries) {
      auto it = split.per_query.find(q.id);
      const double v = it == split.per_query.end() ? 0.0 : it->second;
      all.push_back(v);
      const auto qtype = meta_string(q.metadata, "qtype");
      if (qtype == "TCQ") tcq.push_back(v);
      if (qtype == "TAQ") taq.push_back(v);
      if (auto intent = selector::parse_intent_name(meta_string(q.metadata, "intent")); intent && !qtype.empty()) {
        cells[qtype + "/" + std::string(selector::short_name(*intent))].push_back(v);
      }
    }
    auto& ls = r.per_language[lang];
    ls.overall = mean_of(all);
    ls.tcq_avg = mean_of(tcq);
    ls.taq_avg = mean_of(taq);
    ls.queries = all.size();
    if (lang == r.primary_language) {
      r.overall = ls.overall;
      r.tcq_avg = ls.tcq_avg;
      r.taq_avg = ls.taq_avg;
      r.gap = r.tcq_avg - r.taq_avg;
      r.tcq_count = tcq.size();
      r.taq_count = taq.size();
      for (const auto& [cell, xs] : cells) r.per_intent[cell] = mean_of(xs);
    }
  }
  return r;
}

json MetricReport::to_json() const {
  json langs = json::object();
  for (const auto& [lang, s] : per_language) {
    langs[lang] = {{"overall", s.overall}, {"tcq_avg", s.tcq_avg}, {"taq_avg", s.taq_avg}, {"queries", s.queries}};
  }
  return {{"retriever", retriever},
          {"metric", "nDCG@" + std::to_string(k)},
          {"language", primary_language},
          {"overall", overall},
          {"tcq_avg", tcq_avg},
          {"taq_avg", taq_avg},
          {"gap", gap},
          {"tcq_count", tcq_count},
          {"taq_count", taq_count},
          {"per_intent", per_intent},
          {"per_language", langs}};
}

std::string MetricReport::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << retriever << "  nDCG@" << k << "  (" << primary_language << ")\n";
  out << std::left << std::setw(10) << "Overall" << std::setw(10) << "TCQ" << std::setw(10) << "TAQ"
      << std::setw(10) << "Gap" << "\n";
  out << std::setw(10) << overall << std::setw(10) << tcq_avg << std::setw(10) << taq_avg << std::setw(10) << gap
      << "\n\n";
  out << std::setw(8) << "Intent" << std::setw(10) << "TCQ" << std::setw(10) << "TAQ" << "\n";
  for (auto intent : selector::kIntents) {
    const std::string name(selector::short_name(intent));
    auto cell = [&](const std::string& qtype) {
      auto it = per_intent.find(qtype + "/" + name);
      std::ostringstream c;
      c << std::fixed << std::setprecision(3);
      if (it == per_intent.end()) {
        c << "-";
      } else {
        c << it->second;
      }
      return c.str();
    };
    out << std::setw(8) << name << std::setw(10) << cell("TCQ") << std::setw(10) << cell("TAQ") << "\n";
  }
  out << "\n" << std::setw(8) << "Lang" << std::setw(10) << "Overall" << std::setw(10) << "TCQ" << std::setw(10)
      << "TAQ" << std::setw(10) << "Queries" << "\n";
  for (const auto& [lang, s] : per_language) {
    out << std::setw(8) << lang << std::setw(10) << s.overall << std::setw(10) << s.tcq_avg << std::setw(10)
        << s.taq_avg << std::setw(10) << s.queries << "\n";
  }
  return out.str();
}

std::string to_trec_run(const RunResult& run, std::string_view tag) {
  std::ostringstream out;
  out << std::setprecision(10);
  for (const auto& [qid, ranking] : run) {
    for (std::size_t i = 0; i < ranking.size(); ++i) {
      out << qid << " Q0 " << ranking[i].passage_id << " " << (i + 1) << " " << ranking[i].score << " " << tag
          << "\n";
    }
  }
  return out.str();
}

json F1Report::to_json() const {
  json per = json::object();
  for (const auto& [intent, s] : per_intent) {
    per[std::string(selector::display_name(intent))] = {
        {"support", s.support}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  }
  return {{"micro_f1", micro_f1}, {"macro_f1", macro_f1}, {"per_intent", per}};
}

F1Report f1_validate(const std::map<std::string, selector::Intent>& predictions,
                     const std::map<std::string, selector::Intent>& reference) {
  for (const auto& [id, _] : predictions) {
    if (!reference.contains(id)) throw Error(ErrorKind::key_mismatch, "prediction for unlabeled passage \"" + id + "\"");
  }
  for (const auto& [id, _] : reference) {
    if (!predictions.contains(id)) throw Error(ErrorKind::key_mismatch, "no prediction for passage \"" + id + "\"");
  }
  std::map<selector::Intent, std::size_t> tp, fp, fn, support;
  std::set<selector::Intent> labels;
  std::size_t correct = 0;
  for (const auto& [id, truth] : reference) {
    const auto pred = predictions.at(id);
    labels.insert(truth);
    labels.insert(pred);
    ++support[truth];
    if (pred == truth) {
      ++tp[truth];
      ++correct;
    } else {
      ++fp[pred];
      ++fn[truth];
    }
  }
  F1Report r;
  // Single-label multiclass: micro precision = micro recall = accuracy.
  r.micro_f1 = reference.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(reference.size());
  double macro = 0;
  for (auto label : labels) {
    IntentF1 s;
    s.support = support[label];
    const double t = static_cast<double>(tp[label]);
    s.precision = tp[label] + fp[label] == 0 ? 0.0 : t / static_cast<double>(tp[label] + fp[label]);
    s.recall = tp[label] + fn[label] == 0 ? 0.0 : t / static_cast<double>(tp[label] + fn[label]);
    s.f1 = s.precision + s.recall == 0 ? 0.0 : 2 * s.precision * s.recall / (s.precision + s.recall);
    macro += s.f1;
    r.per_intent[label] = s;
  }
  r.macro_f1 = labels.empty() ? 0.0 : macro / static_cast<double>(labels.size());
  return r;
}

std::map<std::string, selector::Intent> load_intent_labels(const std::filesystem::path& path) {
  std::map<std::string, selector::Intent> out;
  io::for_each_jsonl(path, [&](std::size_t line, const json& j) {
    const auto where = path.string() + ":" + std::to_string(line);
    // candidates.jsonl rows nest the id under "passage"
    const json* holder = &j;
    if (j.is_object() && j.contains("passage") && j["passage"].is_object()) holder = &j["passage"];
    if (!j.is_object() || !holder->contains("passage_id") || !(*holder)["passage_id"].is_string() ||
        !j.contains("intent") || !j["intent"].is_string()) {
      throw Error(ErrorKind::parse, where + ": expected {\"passage_id\", \"intent\"}");
    }
    auto intent = selector::parse_intent_name(j["intent"].get<std::string>());
    if (!intent) throw Error(ErrorKind::parse, where + ": unknown intent " + j["intent"].dump());
    const auto id = (*holder)["passage_id"].get<std::string>();
    if (!out.emplace(id, *intent).second) throw Error(ErrorKind::duplicate_id, where + ": duplicate passage " + id);
  });
  return out;
}

}  // namespace stella::eval
