#include <algorithm>
#include <map>
#include <optional>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "stella/benchmark.hpp"
#include "stella/error.hpp"
#include "stella/ingest.hpp"
#include "stella/io.hpp"
#include "stella/parallel.hpp"
#include "stella/pipeline.hpp"

namespace stella::pipeline {

using nlohmann::json;

namespace {

std::string hash_json(const json& j) { return io::sha256_hex(io::dump(j)); }

std::string fingerprint(const fs::path& p) { return fs::is_directory(p) ? tree_sha256(p) : io::file_sha256(p); }

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_atomic(path, io::to_jsonl(rows));
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_atomic(path, j.dump(2) + "\n");
}

// Records the outputs and writes the manifest beside the first one.
StageManifest finish(StageManifest m, const std::vector<std::pair<std::string, fs::path>>& outputs) {
  const auto dir = manifest_dir(outputs.front().second);
  const auto base = dir.parent_path();
  for (const auto& [role, path] : outputs) {
    m.outputs[role] = fingerprint(path);
    m.files[role] = path.lexically_normal().lexically_relative(base.lexically_normal()).generic_string();
  }
  write_manifest(m, dir);
  log_event("info", "stage_done", {{"stage", m.stage}, {"counts", m.counts}});
  return m;
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

json StageManifest::to_json() const {
  return {{"stage", stage},
          {"inputs", inputs},
          {"outputs", outputs},
          {"files", files},
          {"config_hash", config_hash},
          {"counts", counts}};
}

StageManifest StageManifest::from_json(const json& j) {
  try {
    StageManifest m;
    m.stage = j.at("stage").get<std::string>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.files = j.value("files", std::map<std::string, std::string>{});
    m.config_hash = j.at("config_hash").get<std::string>();
    m.counts = j.value("counts", json::object());
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("stage manifest: ") + e.what());
  }
}

fs::path manifest_dir(const fs::path& output) {
  const auto parent = output.lexically_normal().parent_path();
  return (parent.empty() ? fs::path(".") : parent) / "manifests";
}

void write_manifest(const StageManifest& m, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_atomic(dir / (m.stage + ".json"), m.to_json().dump(2) + "\n");
}

std::vector<std::string> verify_chain(const fs::path& dir) {
  std::vector<std::string> problems;
  if (!fs::is_directory(dir)) return {"no manifest directory at " + dir.string()};
  std::vector<StageManifest> manifests;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) manifests.push_back(StageManifest::from_json(json::parse(io::read_file(f))));

  std::map<std::string, const StageManifest*> producer;
  for (const auto& m : manifests) {
    for (const auto& [role, _] : m.outputs) {
      if (auto [it, fresh] = producer.emplace(role, &m); !fresh) {
        problems.push_back(role + " produced by both " + it->second->stage + " and " + m.stage);
      }
    }
  }
  for (const auto& m : manifests) {
    for (const auto& [role, sha] : m.inputs) {
      auto it = producer.find(role);
      if (it == producer.end()) continue;  // external input
      if (it->second->outputs.at(role) != sha) {
        problems.push_back(m.stage + " consumed a " + role + " that differs from what " + it->second->stage +
                           " produced");
      }
    }
    for (const auto& [role, rel] : m.files) {
      const auto path = dir.parent_path() / rel;
      if (!fs::exists(path)) {
        problems.push_back(m.stage + " output " + role + " is missing (" + path.string() + ")");
      } else if (fingerprint(path) != m.outputs.at(role)) {
        problems.push_back(m.stage + " output " + role + " changed on disk since it was written");
      }
    }
  }
  return problems;
}

void require_artifact(const fs::path& path, std::string_view role, std::string_view producer) {
  if (path.empty() || !fs::exists(path)) {
    throw Error(ErrorKind::missing_artifact, "missing " + std::string(role) + " artifact at \"" + path.string() +
                                                 "\"; produce it with " + std::string(producer));
  }
}

std::string tree_sha256(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    entries.emplace_back(e.path().lexically_relative(dir).generic_string(), io::file_sha256(e.path()));
  }
  std::sort(entries.begin(), entries.end());
  std::string buf;
  for (const auto& [rel, sha] : entries) buf += rel + '\0' + sha + '\n';
  return io::sha256_hex(buf);
}

StageManifest run_ingest(const fs::path& manifest, const fs::path& out_dir) {
  require_artifact(manifest, "manifest", "the document collector");
  auto res = ingest::ingest_manifest(manifest);
  const auto& ledger = res.ledger;
  if (!ledger.reconciles()) throw Error(ErrorKind::precondition, "exclusion ledger does not reconcile");
  for (const auto& e : ledger.parse_errors) {
    log_event("warn", "manifest_parse_error", {{"line", e.line}, {"message", e.message}});
  }

  std::vector<json> rows;
  rows.reserve(res.accepted.size());
  for (const auto& d : res.accepted) rows.push_back(ingest::to_json(d));
  const auto accepted = out_dir / "accepted.jsonl";
  const auto ledger_path = out_dir / "ledger.json";
  write_jsonl(accepted, rows);
  write_json(ledger_path, ledger.to_json());

  StageManifest m;
  m.stage = "ingest";
  m.inputs["manifest"] = io::file_sha256(manifest);
  m.config_hash = hash_json({{"min_year", ingest::kMinPublicationYear}, {"excluded_types", ingest::kExcludedDocTypes}});
  m.counts = {{"manifest_total", ledger.manifest_total},
              {"accepted", ledger.accepted_total()},
              {"excluded", ledger.excluded_total()},
              {"recency_filtered", ledger.recency_filtered},
              {"parse_errors", ledger.parse_errors.size()}};
  return finish(m, {{"accepted", accepted}, {"ledger", ledger_path}});
}

StageManifest run_chunk(const fs::path& accepted, const fs::path& out, const chunker::ChunkConfig& cfg) {
  require_artifact(accepted, "accepted documents", "`stella ingest`");
  cfg.validate();
  const auto docs = ingest::load_documents(accepted);
  std::vector<json> rows;
  std::size_t empty = 0;
  for (const auto& d : docs) {
    try {
      for (const auto& p : chunker::chunk_document(d, cfg)) rows.push_back(chunker::to_json(p));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::empty_document) throw;
      ++empty;
      log_event("warn", "empty_document", {{"doc_id", d.doc_id}});
    }
  }
  write_jsonl(out, rows);

  StageManifest m;
  m.stage = "chunk";
  m.inputs["accepted"] = io::file_sha256(accepted);
  m.config_hash = hash_json({{"size", cfg.chunk_size}, {"overlap", cfg.overlap}, {"separators", cfg.separator_hierarchy}});
  m.counts = {{"documents", docs.size()}, {"passages", rows.size()}, {"empty_documents", empty}};
  return finish(m, {{"passages", out}});
}

StageManifest run_terms(const fs::path& passages_path, const fs::path& freq, const fs::path& out,
                        const terms::TermFilterConfig& cfg, gateway::Tagger& tagger, std::size_t workers) {
  require_artifact(passages_path, "passages", "`stella chunk`");
  require_artifact(freq, "word frequency table", "a word<TAB>zipf TSV");
  cfg.validate();
  const auto passages = chunker::load_passages(passages_path);
  const auto candidates = terms::extract_candidates(passages, workers);
  const auto table = terms::ZipfTable::load(freq);
  terms::BuildReport report;
  const auto passages_sha = io::file_sha256(passages_path);
  const auto dict = terms::build_dictionary(candidates, cfg, table, tagger, &report, passages_sha);
  write_json(out, dict.to_json());

  json rejected = {{"doc_frequency", 0}, {"zipf", 0}, {"pos", 0}};
  for (const auto& [_, stage] : report.rejected) rejected[std::string(terms::to_string(stage))] = rejected[std::string(terms::to_string(stage))].get<int>() + 1;
  StageManifest m;
  m.stage = "terms";
  m.inputs = {{"passages", passages_sha}, {"freq", io::file_sha256(freq)}};
  m.config_hash = hash_json(cfg.to_json());
  m.counts = {{"candidates", candidates.size()}, {"entries", dict.size()}, {"rejected", rejected}};
  return finish(m, {{"dict", out}});
}

StageManifest run_select(const fs::path& passages_path, const fs::path& dict_path, const fs::path& out,
                         const SelectOptions& opt, gateway::ChatGateway& chat, gateway::Embedder& embedder) {
  require_artifact(passages_path, "passages", "`stella chunk`");
  require_artifact(dict_path, "dictionary", "`stella terms`");
  opt.cluster.validate();
  const auto passages = chunker::load_passages(passages_path);
  const auto dict = terms::TerminologyDictionary::load(dict_path);
  const auto dense = selector::density_filter(passages, dict, opt.min_distinct);

  std::vector<std::optional<selector::Intent>> intents(dense.size());
  auto errors = parallel_for(dense.size(), opt.workers,
                             [&](std::size_t i) { intents[i] = selector::classify_intent(dense[i].text, chat); });
  std::size_t unparseable = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::unparseable_intent) throw;
      ++unparseable;
      log_event("warn", "unparseable_intent", {{"passage_id", dense[i].passage_id}, {"message", e.what()}});
    }
  }

  std::vector<std::string> texts;
  for (const auto& p : dense) texts.push_back(p.text);
  const auto vectors = embedder.embed_all(texts);

  std::vector<json> rows;
  std::vector<json> intent_rows;
  json pools = json::object();
  json skipped = json::array();
  std::size_t backfilled = 0;
  for (std::size_t n = 0; n < selector::kIntents.size(); ++n) {
    const auto intent = selector::kIntents[n];
    std::vector<selector::PoolMember> pool;
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (intents[i] != intent) continue;
      pool.push_back({dense[i], terms::distinct_terms(dense[i].text, dict), vectors[i].values});
      intent_rows.push_back({{"passage_id", dense[i].passage_id}, {"intent", selector::display_name(intent)}});
    }
    const auto name = std::string(selector::short_name(intent));
    pools[name] = pool.size();
    if (opt.sample > 0 && pool.size() > opt.sample) {
      std::vector<selector::PoolMember> kept;
      for (auto i : selector::sample_indices(pool.size(), opt.sample, opt.cluster.seed + n)) kept.push_back(pool[i]);
      pool = std::move(kept);
    }
    try {
      const auto sel = selector::select_representatives(pool, intent, opt.cluster);
      for (const auto& c : sel.candidates) rows.push_back(selector::to_json(c));
      backfilled += sel.backfilled;
      if (sel.flagged) log_event("warn", "pool_backfilled", {{"intent", name}, {"backfilled", sel.backfilled}});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::pool_too_small) throw;
      skipped.push_back(name);
      log_event("warn", "pool_too_small", {{"intent", name}, {"pool", pool.size()}, {"message", e.what()}});
    }
  }
  if (rows.empty()) throw Error(ErrorKind::pool_too_small, "no intent pool was large enough to select from");

  const auto intents_path = out.parent_path() / "intents.jsonl";
  write_jsonl(out, rows);
  write_jsonl(intents_path, intent_rows);

  StageManifest m;
  m.stage = "select";
  m.inputs = {{"passages", io::file_sha256(passages_path)}, {"dict", io::file_sha256(dict_path)}};
  m.config_hash = hash_json({{"k", opt.cluster.k},
                             {"per_medoid", opt.cluster.per_medoid},
                             {"seed", opt.cluster.seed},
                             {"min_distinct", opt.min_distinct},
                             {"sample", opt.sample},
                             {"embedder", embedder.provider_id()}});
  m.counts = {{"passages", passages.size()},
              {"dense", dense.size()},
              {"unparseable_intent", unparseable},
              {"pools", pools},
              {"skipped_intents", skipped},
              {"candidates", rows.size()},
              {"backfilled", backfilled}};
  return finish(m, {{"candidates", out}, {"intents", intents_path}});
}

StageManifest run_generate(const fs::path& candidates_path, const fs::path& passages_path, const fs::path& out,
                           const GenerateOptions& opt, gateway::ChatGateway& chat) {
  require_artifact(candidates_path, "candidates", "`stella select`");
  require_artifact(passages_path, "passages", "`stella chunk`");
  const auto candidates = selector::load_candidates(candidates_path);
  std::map<std::string, std::vector<chunker::Passage>> by_doc;
  for (auto& p : chunker::load_passages(passages_path)) by_doc[p.doc_id].push_back(std::move(p));

  struct Out {
    querygen::QueryRecord tcq;
    std::optional<querygen::QueryRecord> taq;
    querygen::DescribedTerms described;
  };
  std::vector<Out> results(candidates.size());
  auto errors = parallel_for(candidates.size(), opt.workers, [&](std::size_t i) {
    const auto& c = candidates[i];
    auto& r = results[i];
    r.described = querygen::describe_terms(c, by_doc[c.passage.doc_id], chat, opt.context_window);
    r.tcq = querygen::generate_tcq(c, querygen::tcq_terms(c, r.described), chat, opt.generation);
    if (!r.described.taq_skipped) r.taq = querygen::generate_taq(c, r.described.defined, chat, opt.generation);
  });
  rethrow_first(errors);

  std::vector<json> rows;
  std::size_t tcq = 0, taq = 0, skipped = 0, invalid = 0, repairs = 0, undefinable = 0, dropped = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    undefinable += r.described.undefinable.size();
    dropped += r.described.dropped.size();
    for (const auto* q : {&r.tcq, r.taq ? &*r.taq : nullptr}) {
      if (!q) continue;
      rows.push_back(querygen::to_json(*q));
      (q->qtype == querygen::QueryType::tcq ? tcq : taq) += 1;
      repairs += q->repair_rounds;
      if (!q->valid) {
        ++invalid;
        log_event("warn", "constraint_unsatisfiable", {{"query_id", q->query_id}, {"violations", q->violations}});
      }
    }
    if (!r.taq) {
      ++skipped;
      log_event("info", "taq_skipped", {{"passage_id", candidates[i].passage.passage_id}});
    }
  }
  write_jsonl(out, rows);

  StageManifest m;
  m.stage = "generate";
  m.inputs = {{"candidates", io::file_sha256(candidates_path)}, {"passages", io::file_sha256(passages_path)}};
  m.config_hash = hash_json({{"max_repairs", opt.generation.max_repairs},
                             {"temperature", opt.generation.temperature},
                             {"context_window", opt.context_window}});
  m.counts = {{"candidates", candidates.size()},
              {"tcq", tcq},
              {"taq", taq},
              {"taq_skipped", skipped},
              {"invalid", invalid},
              {"repair_rounds", repairs},
              {"undefinable_terms", undefinable},
              {"dropped_terms", dropped}};
  return finish(m, {{"queries", out}});
}

StageManifest run_translate(const fs::path& queries_path, const fs::path& dict_path, const fs::path& out,
                            const std::vector<std::string>& languages, const xlingual::TranslateConfig& cfg,
                            gateway::ChatGateway& chat, std::size_t workers) {
  require_artifact(queries_path, "queries", "`stella generate`");
  require_artifact(dict_path, "dictionary", "`stella terms`");
  for (const auto& l : languages) {
    if (!xlingual::is_target_language(l)) throw Error(ErrorKind::config, "unsupported language \"" + l + "\"");
  }
  const auto dict = terms::TerminologyDictionary::load(dict_path);
  std::vector<querygen::QueryRecord> queries;
  std::size_t invalid = 0;
  for (auto& q : querygen::load_queries(queries_path)) {
    if (q.valid) {
      queries.push_back(std::move(q));
    } else {
      ++invalid;
    }
  }

  const auto n_lang = languages.size();
  std::vector<xlingual::TranslationRecord> records(queries.size() * n_lang);
  auto errors = parallel_for(records.size(), workers, [&](std::size_t i) {
    records[i] = xlingual::translate_query(queries[i / n_lang], languages[i % n_lang], dict, chat, cfg);
  });
  rethrow_first(errors);

  std::vector<json> rows;
  json per_lang = json::object();
  for (const auto& l : languages) per_lang[l] = {{"translated", 0}, {"term_failures", 0}, {"repair_rounds", 0}};
  for (const auto& r : records) {
    rows.push_back(xlingual::to_json(r));
    auto& s = per_lang[r.language];
    s["translated"] = s["translated"].get<std::size_t>() + 1;
    s["repair_rounds"] = s["repair_rounds"].get<std::size_t>() + r.repair_rounds;
    if (!r.term_check_passed) {
      s["term_failures"] = s["term_failures"].get<std::size_t>() + 1;
      log_event("warn", "term_preservation_failure", {{"query_id", r.query_id}, {"language", r.language}});
    }
  }
  write_jsonl(out, rows);

  StageManifest m;
  m.stage = "translate";
  m.inputs = {{"queries", io::file_sha256(queries_path)}, {"dict", io::file_sha256(dict_path)}};
  m.config_hash = hash_json({{"languages", languages}, {"max_repairs", cfg.max_repairs}, {"temperature", cfg.temperature}});
  m.counts = {{"source_queries", queries.size()}, {"skipped_invalid", invalid}, {"languages", per_lang}};
  return finish(m, {{"translations", out}});
}

StageManifest run_audit(const fs::path& translations_path, const fs::path& out, double threshold,
                        gateway::ChatGateway& chat, gateway::Embedder& embedder) {
  require_artifact(translations_path, "translations", "`stella translate`");
  auto records = xlingual::load_translations(translations_path);
  const auto bt = xlingual::audit_back_translation(records, chat, embedder, threshold);
  const auto tp = xlingual::audit_term_preservation(records);
  for (const auto& [lang, s] : bt.languages) {
    if (s.warn) log_event("warn", "back_translation_below_threshold", {{"language", lang}, {"mean", s.mean}});
  }
  json per_record = json::array();
  for (const auto& r : records) {
    per_record.push_back({{"query_id", r.query_id},
                          {"language", r.language},
                          {"back_translation", r.back_translation ? json(*r.back_translation) : json(nullptr)},
                          {"bt_cosine", r.bt_cosine ? json(*r.bt_cosine) : json(nullptr)}});
  }
  write_json(out, {{"back_translation", bt.to_json()}, {"term_preservation", tp.to_json()}, {"records", per_record}});

  StageManifest m;
  m.stage = "audit";
  m.inputs = {{"translations", io::file_sha256(translations_path)}};
  m.config_hash = hash_json({{"threshold", threshold}, {"embedder", embedder.provider_id()}});
  m.counts = {{"records", records.size()},
              {"term_checked", tp.checked},
              {"term_failures", tp.failures.size()},
              {"term_pass_rate", tp.pass_rate()}};
  return finish(m, {{"audit", out}});
}

StageManifest run_export(const fs::path& passages_path, const fs::path& accepted_path, const fs::path& queries_path,
                         const fs::path& translations_path, const fs::path& out_dir) {
  require_artifact(passages_path, "passages", "`stella chunk`");
  require_artifact(accepted_path, "accepted documents", "`stella ingest`");
  require_artifact(queries_path, "queries", "`stella generate`");
  require_artifact(translations_path, "translations", "`stella translate`");
  std::map<std::string, std::string> titles;
  for (const auto& d : ingest::load_documents(accepted_path)) titles[d.doc_id] = d.title;
  const auto corpus = benchmark::corpus_from_passages(chunker::load_passages(passages_path), titles);
  const auto queries = querygen::load_queries(queries_path);
  const auto translations = xlingual::load_translations(translations_path);

  // Stale splits must not survive a re-export; only split directories go.
  if (fs::is_directory(out_dir)) {
    for (const auto& e : fs::directory_iterator(out_dir)) {
      if (e.is_directory() && fs::exists(e.path() / "queries.jsonl")) fs::remove_all(e.path());
    }
  }
  const auto report = benchmark::export_beir(corpus, queries, translations, out_dir);
  write_json(out_dir / "export_report.json", report.to_json());

  StageManifest m;
  m.stage = "export";
  m.inputs = {{"passages", io::file_sha256(passages_path)},
              {"accepted", io::file_sha256(accepted_path)},
              {"queries", io::file_sha256(queries_path)},
              {"translations", io::file_sha256(translations_path)}};
  m.config_hash = hash_json({{"layout", "beir"}});
  m.counts = {{"corpus", corpus.size()}, {"languages", report.to_json()}};
  return finish(m, {{"beir", out_dir}});
}

eval::MetricReport evaluate_benchmark(const std::map<std::string, benchmark::BeirSplit>& splits,
                                      const EvalOptions& opt, gateway::Embedder* embedder,
                                      std::map<std::string, eval::RunResult>* runs) {
  if (opt.retriever != "bm25" && opt.retriever != "dense") {
    throw Error(ErrorKind::config, "retriever must be bm25 or dense");
  }
  if (opt.retriever == "dense" && !embedder) throw Error(ErrorKind::config, "dense retrieval needs an embedder");
  const std::size_t cutoff = std::max<std::size_t>(opt.k, 100);
  std::map<std::string, eval::SplitScores> scores;
  // Splits from one export share the corpus; index it once.
  const std::vector<benchmark::CorpusEntry>* indexed = nullptr;
  std::optional<eval::Bm25Index> bm25;
  for (const auto& [lang, split] : splits) {
    eval::RunResult run;
    if (opt.retriever == "bm25") {
      if (!indexed || *indexed != split.corpus) {
        bm25.emplace(eval::Bm25Index::from_corpus(split.corpus, opt.bm25));
        indexed = &split.corpus;
      }
      run = eval::run_bm25(*bm25, split.queries, cutoff, opt.workers);
    } else {
      run = eval::run_dense(*embedder, split.corpus, split.queries, cutoff, opt.query_prefix, opt.passage_prefix);
    }
    const auto e = eval::evaluate(run, eval::qrels_from(split.qrels), opt.k);
    scores[lang] = {e.per_query, split.queries};
    if (runs) (*runs)[lang] = std::move(run);
  }
  const std::string primary = splits.contains("en") || splits.empty() ? "en" : splits.begin()->first;
  return eval::build_report(scores, opt.retriever, opt.k, primary);
}

StageManifest run_eval(const fs::path& beir, const fs::path& out, const EvalOptions& opt,
                       gateway::Embedder* embedder) {
  require_artifact(beir, "BEIR benchmark", "`stella export`");
  std::map<std::string, benchmark::BeirSplit> splits;
  if (fs::exists(beir / "queries.jsonl")) {
    splits.emplace(beir.lexically_normal().filename().string(), benchmark::load_beir(beir));
  } else {
    splits = benchmark::load_benchmark(beir);
  }
  if (splits.empty()) throw Error(ErrorKind::missing_artifact, "no BEIR splits under " + beir.string());
  std::map<std::string, eval::RunResult> runs;
  const auto report = evaluate_benchmark(splits, opt, embedder, &runs);
  write_json(out, report.to_json());
  const auto run_dir = out.parent_path() / "runs";
  fs::create_directories(run_dir);
  for (const auto& [lang, run] : runs) {
    io::write_atomic(run_dir / (opt.retriever + "." + lang + ".trec"), eval::to_trec_run(run, "stella-" + opt.retriever));
  }

  StageManifest m;
  m.stage = "eval";
  m.inputs = {{"beir", fingerprint(beir)}};
  m.config_hash = hash_json({{"retriever", opt.retriever},
                             {"k", opt.k},
                             {"k1", opt.bm25.k1},
                             {"b", opt.bm25.b},
                             {"query_prefix", opt.query_prefix},
                             {"passage_prefix", opt.passage_prefix}});
  m.counts = {{"splits", splits.size()}, {"overall", report.overall}, {"gap", report.gap}};
  return finish(m, {{"report", out}, {"runs", run_dir}});
}

json run_all(const PipelineConfig& cfg) {
  cfg.validate();
  const auto& p = cfg.paths;
  fs::create_directories(p.work_dir);
  auto clients = make_clients(cfg);
  log_event("info", "run_all_start",
            {{"work_dir", p.work_dir.string()}, {"mock", cfg.mock}, {"config_hash", hash_json(cfg.to_json())}});

  run_ingest(p.manifest, p.work_dir);
  run_chunk(p.accepted(), p.passages(), cfg.chunk);
  run_terms(p.passages(), p.freq, p.dict(), cfg.terms, *clients.tagger, cfg.workers);
  run_select(p.passages(), p.dict(), p.candidates(),
             {cfg.cluster, cfg.min_distinct, cfg.sample, cfg.workers}, *clients.chat, *clients.embedder);
  run_generate(p.candidates(), p.passages(), p.queries(), {cfg.generation, cfg.context_window, cfg.workers},
               *clients.chat);
  run_translate(p.queries(), p.dict(), p.translations(), cfg.languages, cfg.translation, *clients.chat, cfg.workers);
  run_audit(p.translations(), p.audit(), cfg.bt_threshold, *clients.chat, *clients.embedder);
  run_export(p.passages(), p.accepted(), p.queries(), p.translations(), p.beir());
  run_eval(p.beir(), p.report(),
           {cfg.retriever, cfg.eval_k, cfg.bm25, cfg.workers, cfg.embed.query_prefix, cfg.embed.passage_prefix},
           clients.embedder.get());
  if (!p.labels.empty()) {
    const auto f1 = eval::f1_validate(eval::load_intent_labels(p.work_dir / "intents.jsonl"),
                                      eval::load_intent_labels(p.labels));
    write_json(p.work_dir / "intent_f1.json", f1.to_json());
  }

  const auto problems = verify_chain(p.work_dir / "manifests");
  if (!problems.empty()) {
    for (const auto& pr : problems) log_event("error", "manifest_chain", {{"problem", pr}});
    throw Error(ErrorKind::precondition, "stage manifest chain is broken: " + problems.front());
  }

  json prints = json::object();
  for (const auto& e : fs::recursive_directory_iterator(p.work_dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = e.path().lexically_relative(p.work_dir).generic_string();
    if (rel == "fingerprints.json") continue;
    prints[rel] = io::file_sha256(e.path());
  }
  write_json(p.work_dir / "fingerprints.json", prints);
  log_event("info", "run_all_done", {{"artifacts", prints.size()}});
  return prints;
}

void configure_logging(std::string_view level) {
  auto logger = spdlog::stderr_color_mt("stella");
  // Messages carry the rest of the JSON object.
  logger->set_pattern(R"({"ts":"%Y-%m-%dT%H:%M:%S.%eZ","level":"%l",%v})", spdlog::pattern_time_type::utc);
  logger->set_level(spdlog::level::from_str(std::string(level)));
  spdlog::set_default_logger(logger);
}

void log_event(std::string_view level, std::string_view event, const json& fields) {
  json body = fields.is_object() ? fields : json{{"detail", fields}};
  body["event"] = event;
  const auto text = io::dump(body);
  spdlog::log(spdlog::level::from_str(std::string(level)), "{}", text.substr(1, text.size() - 2));
}

}  // namespace stella::pipeline
