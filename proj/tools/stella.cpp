#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "stella/error.hpp"
#include "stella/eval.hpp"
#include "stella/io.hpp"
#include "stella/pipeline.hpp"

namespace fs = std::filesystem;
using namespace stella;
using nlohmann::json;

namespace {

fs::path or_default(const std::string& flag, const fs::path& fallback) { return flag.empty() ? fallback : fs::path(flag); }

void print_error(std::string_view kind, std::string_view message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stella: technical-retrieval benchmark builder"};
  app.require_subcommand(1);

  std::string config_path, log_level = "info";
  bool mock = false;
  std::size_t workers = 0;
  app.add_option("--config", config_path, "TOML pipeline config")->check(CLI::ExistingFile);
  app.add_flag("--mock", mock, "offline simulated models (no network)");
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
  app.add_option("--workers", workers, "worker threads");

  // ingest
  std::string manifest, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "apply the selection rules to a manifest");
  ingest->add_option("--manifest", manifest, "manifest.jsonl");
  ingest->add_option("--out", ingest_out, "output directory");

  // chunk
  std::string chunk_in, chunk_out;
  std::optional<std::size_t> size, overlap;
  auto* chunk = app.add_subcommand("chunk", "split accepted documents into passages");
  chunk->add_option("--in", chunk_in, "accepted.jsonl");
  chunk->add_option("--out", chunk_out, "passages.jsonl");
  chunk->add_option("--size", size, "tokens per passage");
  chunk->add_option("--overlap", overlap, "overlap tokens");

  // terms
  std::string terms_passages, freq, terms_out;
  std::optional<std::size_t> min_df;
  std::optional<double> zipf;
  auto* terms_cmd = app.add_subcommand("terms", "build the terminology dictionary");
  terms_cmd->add_option("--passages", terms_passages, "passages.jsonl");
  terms_cmd->add_option("--freq", freq, "word<TAB>zipf table");
  terms_cmd->add_option("--out", terms_out, "dict.json");
  terms_cmd->add_option("--min-df", min_df, "minimum passage frequency");
  terms_cmd->add_option("--zipf", zipf, "Zipf threshold");

  // select
  std::string sel_passages, sel_dict, sel_out;
  std::optional<std::size_t> k, per_medoid, min_distinct, sample;
  std::optional<std::uint64_t> seed;
  auto* select = app.add_subcommand("select", "density filter, intent pools and k-medoids selection");
  select->add_option("--passages", sel_passages, "passages.jsonl");
  select->add_option("--dict", sel_dict, "dict.json");
  select->add_option("--out", sel_out, "candidates.jsonl");
  select->add_option("--k", k, "medoids per intent");
  select->add_option("--per-medoid", per_medoid, "passages per medoid");
  select->add_option("--min-distinct", min_distinct, "distinct terms a passage needs");
  select->add_option("--sample", sample, "cap on each intent pool (0 = all)");
  select->add_option("--seed", seed, "sampling seed");

  // generate
  std::string gen_candidates, gen_passages, gen_out;
  std::optional<std::size_t> max_repairs, window;
  auto* generate = app.add_subcommand("generate", "TCQ/TAQ query generation");
  generate->add_option("--candidates", gen_candidates, "candidates.jsonl");
  generate->add_option("--passages", gen_passages, "passages.jsonl (term context)");
  generate->add_option("--dict", sel_dict, "dict.json (optional; identified terms travel with the candidates)");
  generate->add_option("--out", gen_out, "queries.jsonl");
  generate->add_option("--max-repairs", max_repairs, "repair re-prompts per query");
  generate->add_option("--window", window, "context window in passages");

  // translate
  std::string tr_queries, tr_dict, tr_out, langs;
  auto* translate = app.add_subcommand("translate", "translate queries with term preservation");
  translate->add_option("--queries", tr_queries, "queries.jsonl");
  translate->add_option("--dict", tr_dict, "dict.json");
  translate->add_option("--langs", langs, "comma-separated language codes");
  translate->add_option("--out", tr_out, "translations.jsonl");

  // audit
  std::string au_translations, au_out;
  std::optional<double> threshold;
  auto* audit = app.add_subcommand("audit", "back-translation and term preservation audit");
  audit->add_option("--translations", au_translations, "translations.jsonl");
  audit->add_option("--out", au_out, "audit.json");
  audit->add_option("--threshold", threshold, "back-translation cosine warning threshold");

  // export
  std::string ex_passages, ex_accepted, ex_queries, ex_translations, ex_out;
  auto* exp = app.add_subcommand("export", "write BEIR splits");
  exp->add_option("--passages", ex_passages, "passages.jsonl");
  exp->add_option("--accepted", ex_accepted, "accepted.jsonl (titles)");
  exp->add_option("--queries", ex_queries, "queries.jsonl");
  exp->add_option("--translations", ex_translations, "translations.jsonl");
  exp->add_option("--out", ex_out, "BEIR root directory");

  // eval
  std::string ev_beir, ev_out, retriever;
  std::optional<std::size_t> ev_k;
  std::optional<double> k1, b;
  auto* evalc = app.add_subcommand("eval", "nDCG@k over BEIR splits");
  evalc->add_option("--beir", ev_beir, "split directory or BEIR root");
  evalc->add_option("--retriever", retriever, "bm25|dense")->check(CLI::IsMember({"bm25", "dense"}));
  evalc->add_option("--k", ev_k, "rank cutoff");
  evalc->add_option("--k1", k1, "BM25 k1");
  evalc->add_option("--b", b, "BM25 b");
  evalc->add_option("--out", ev_out, "report.json");

  // validate-intents
  std::string pred, ref, vi_out;
  auto* validate = app.add_subcommand("validate-intents", "micro/macro F1 of intents against expert labels");
  validate->add_option("--pred", pred, "predicted labels (JSONL or candidates.jsonl)")->required();
  validate->add_option("--ref", ref, "expert labels JSONL")->required();
  validate->add_option("--out", vi_out, "write the report here as well");

  auto* run_all = app.add_subcommand("run-all", "every stage over the config paths");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    pipeline::configure_logging(log_level);
    pipeline::PipelineConfig cfg;
    if (!config_path.empty()) cfg = pipeline::load_config(config_path);
    if (mock) cfg.mock = true;
    if (workers > 0) cfg.workers = workers;
    const auto& P = cfg.paths;

    if (*ingest) {
      pipeline::run_ingest(or_default(manifest, P.manifest), or_default(ingest_out, P.work_dir));
    } else if (*chunk) {
      if (size) cfg.chunk.chunk_size = *size;
      if (overlap) cfg.chunk.overlap = *overlap;
      pipeline::run_chunk(or_default(chunk_in, P.accepted()), or_default(chunk_out, P.passages()), cfg.chunk);
    } else if (*terms_cmd) {
      if (min_df) cfg.terms.min_doc_frequency = *min_df;
      if (zipf) cfg.terms.zipf_threshold = *zipf;
      auto clients = pipeline::make_clients(cfg);
      pipeline::run_terms(or_default(terms_passages, P.passages()), or_default(freq, P.freq),
                          or_default(terms_out, P.dict()), cfg.terms, *clients.tagger, cfg.workers);
    } else if (*select) {
      if (k) cfg.cluster.k = *k;
      if (per_medoid) cfg.cluster.per_medoid = *per_medoid;
      if (min_distinct) cfg.min_distinct = *min_distinct;
      if (sample) cfg.sample = *sample;
      if (seed) cfg.cluster.seed = *seed;
      auto clients = pipeline::make_clients(cfg);
      pipeline::run_select(or_default(sel_passages, P.passages()), or_default(sel_dict, P.dict()),
                           or_default(sel_out, P.candidates()),
                           {cfg.cluster, cfg.min_distinct, cfg.sample, cfg.workers}, *clients.chat,
                           *clients.embedder);
    } else if (*generate) {
      if (max_repairs) cfg.generation.max_repairs = *max_repairs;
      if (window) cfg.context_window = *window;
      auto clients = pipeline::make_clients(cfg);
      pipeline::run_generate(or_default(gen_candidates, P.candidates()), or_default(gen_passages, P.passages()),
                             or_default(gen_out, P.queries()), {cfg.generation, cfg.context_window, cfg.workers},
                             *clients.chat);
    } else if (*translate) {
      if (!langs.empty()) cfg.languages = CLI::detail::split(langs, ',');
      cfg.validate();
      auto clients = pipeline::make_clients(cfg);
      pipeline::run_translate(or_default(tr_queries, P.queries()), or_default(tr_dict, P.dict()),
                              or_default(tr_out, P.translations()), cfg.languages, cfg.translation, *clients.chat,
                              cfg.workers);
    } else if (*audit) {
      if (threshold) cfg.bt_threshold = *threshold;
      auto clients = pipeline::make_clients(cfg);
      pipeline::run_audit(or_default(au_translations, P.translations()), or_default(au_out, P.audit()),
                          cfg.bt_threshold, *clients.chat, *clients.embedder);
    } else if (*exp) {
      pipeline::run_export(or_default(ex_passages, P.passages()), or_default(ex_accepted, P.accepted()),
                           or_default(ex_queries, P.queries()), or_default(ex_translations, P.translations()),
                           or_default(ex_out, P.beir()));
    } else if (*evalc) {
      if (!retriever.empty()) cfg.retriever = retriever;
      if (ev_k) cfg.eval_k = *ev_k;
      if (k1) cfg.bm25.k1 = *k1;
      if (b) cfg.bm25.b = *b;
      auto clients = pipeline::make_clients(cfg);
      const auto out = or_default(ev_out, P.report());
      pipeline::run_eval(or_default(ev_beir, P.beir()), out,
                         {cfg.retriever, cfg.eval_k, cfg.bm25, cfg.workers, cfg.embed.query_prefix,
                          cfg.embed.passage_prefix},
                         clients.embedder.get());
      const auto report = json::parse(io::read_file(out));
      std::cout << report.dump(2) << "\n";
    } else if (*validate) {
      const auto report = eval::f1_validate(eval::load_intent_labels(pred), eval::load_intent_labels(ref));
      const auto text = report.to_json().dump(2);
      if (!vi_out.empty()) io::write_atomic(vi_out, text + "\n");
      std::cout << text << "\n";
    } else if (*run_all) {
      if (config_path.empty()) throw Error(ErrorKind::config, "run-all needs --config");
      const auto prints = pipeline::run_all(cfg);
      std::cout << json{{"work_dir", P.work_dir.string()}, {"artifacts", prints.size()}}.dump() << "\n";
    }
    return 0;
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return 1;
  }
}
