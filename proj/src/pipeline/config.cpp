#include <cstdlib>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "stella/error.hpp"
#include "stella/io.hpp"
#include "stella/pipeline.hpp"
#include "stella/xlingual.hpp"

namespace stella::pipeline {

using nlohmann::json;

namespace {

std::string where(const toml::node& n) {
  std::ostringstream out;
  out << n.source().begin;
  return out.str();
}

// Rejects keys outside `allowed` so typos do not silently fall back to
// defaults.
void check_keys(const toml::table& t, std::string_view table_name, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, node] : t) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key.str() == a;
    if (!ok) {
      throw Error(ErrorKind::config, "unknown key \"" + std::string(key.str()) + "\" in [" +
                                         std::string(table_name) + "] at " + where(node));
    }
  }
}

const toml::table* sub(const toml::table& t, std::string_view key) {
  const auto* node = t.get(key);
  if (!node) return nullptr;
  if (!node->is_table()) throw Error(ErrorKind::config, "[" + std::string(key) + "] must be a table");
  return node->as_table();
}

template <class T>
void read(const toml::table* t, std::string_view key, T& out) {
  if (!t) return;
  const auto* node = t->get(key);
  if (!node) return;
  if constexpr (std::is_same_v<T, std::string>) {
    auto v = node->value<std::string>();
    if (!v) throw Error(ErrorKind::config, std::string(key) + " must be a string at " + where(*node));
    out = *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    auto v = node->value<bool>();
    if (!v) throw Error(ErrorKind::config, std::string(key) + " must be a boolean at " + where(*node));
    out = *v;
  } else if constexpr (std::is_floating_point_v<T>) {
    auto v = node->value<double>();
    if (!v) throw Error(ErrorKind::config, std::string(key) + " must be a number at " + where(*node));
    out = *v;
  } else {
    auto v = node->value<std::int64_t>();
    if (!v || *v < 0) throw Error(ErrorKind::config, std::string(key) + " must be a non-negative integer at " + where(*node));
    out = static_cast<T>(*v);
  }
}

void read_path(const toml::table* t, std::string_view key, const fs::path& base, fs::path& out) {
  std::string s;
  read(t, key, s);
  if (s.empty()) return;
  const fs::path p(s);
  out = p.is_absolute() ? p : (base / p).lexically_normal();
}

gateway::ProviderProfile read_profile(const toml::table& t, std::string_view name, const std::string& role,
                                      std::string* query_prefix = nullptr, std::string* passage_prefix = nullptr) {
  if (query_prefix) {
    check_keys(t, name,
               {"kind", "endpoint_url", "path", "model", "api_key_env", "auth_header", "auth_prefix", "max_concurrent",
                "retry_limit", "backoff_base_ms", "timeout_ms", "max_batch", "dimension", "query_prefix",
                "passage_prefix"});
    read(&t, "query_prefix", *query_prefix);
    read(&t, "passage_prefix", *passage_prefix);
  } else {
    check_keys(t, name,
               {"kind", "endpoint_url", "path", "model", "api_key_env", "auth_header", "auth_prefix", "max_concurrent",
                "retry_limit", "backoff_base_ms", "timeout_ms", "max_batch", "dimension"});
  }
  gateway::ProviderProfile p;
  read(&t, "kind", p.kind);
  if (p.kind != "openai" && p.kind != "sidecar" && p.kind != "mock") {
    throw Error(ErrorKind::config, "[" + std::string(name) + "] kind must be openai, sidecar or mock");
  }
  read(&t, "endpoint_url", p.gateway.endpoint_url);
  read(&t, "path", p.path);
  read(&t, "model", p.model);
  read(&t, "auth_header", p.auth_header);
  read(&t, "auth_prefix", p.auth_prefix);
  read(&t, "max_concurrent", p.gateway.max_concurrent);
  read(&t, "retry_limit", p.gateway.retry_limit);
  read(&t, "backoff_base_ms", p.gateway.backoff_base_ms);
  read(&t, "timeout_ms", p.gateway.timeout_ms);
  read(&t, "max_batch", p.max_batch);
  read(&t, "dimension", p.dimension);
  std::string key_env;
  read(&t, "api_key_env", key_env);
  if (!key_env.empty()) {
    if (const char* v = std::getenv(key_env.c_str())) p.gateway.api_key = v;
  }
  if (p.kind != "mock" && p.gateway.endpoint_url.empty()) {
    throw Error(ErrorKind::config, "[" + std::string(name) + "] needs endpoint_url for " + role);
  }
  return p;
}

json profile_json(const gateway::ProviderProfile& p) {
  return {{"kind", p.kind},
          {"endpoint_url", p.gateway.endpoint_url},
          {"path", p.path},
          {"model", p.model},
          {"max_batch", p.max_batch},
          {"dimension", p.dimension},
          {"retry_limit", p.gateway.retry_limit}};
}

}  // namespace

void PipelineConfig::validate() const {
  chunk.validate();
  terms.validate();
  cluster.validate();
  if (workers == 0) throw Error(ErrorKind::config, "workers must be positive");
  if (min_distinct == 0) throw Error(ErrorKind::config, "select.min_distinct must be positive");
  for (const auto& l : languages) {
    if (!xlingual::is_target_language(l)) throw Error(ErrorKind::config, "unsupported language \"" + l + "\"");
  }
  if (retriever != "bm25" && retriever != "dense") throw Error(ErrorKind::config, "eval.retriever must be bm25 or dense");
  if (eval_k == 0) throw Error(ErrorKind::config, "eval.k must be positive");
  if (bt_threshold < -1 || bt_threshold > 1) throw Error(ErrorKind::config, "audit.bt_threshold must be in [-1, 1]");
  chat.gateway.validate();
  embed.profile.gateway.validate();
  if (tagger) tagger->gateway.validate();
}

json PipelineConfig::to_json() const {
  json j = {{"seed", seed},
            {"workers", workers},
            {"mock", mock},
            {"chunk", {{"size", chunk.chunk_size}, {"overlap", chunk.overlap}}},
            {"terms", terms.to_json()},
            {"select",
             {{"k", cluster.k}, {"per_medoid", cluster.per_medoid}, {"min_distinct", min_distinct}, {"sample", sample}}},
            {"generate",
             {{"max_repairs", generation.max_repairs},
              {"temperature", generation.temperature},
              {"context_window", context_window}}},
            {"translate", {{"languages", languages}, {"max_repairs", translation.max_repairs}}},
            {"audit", {{"bt_threshold", bt_threshold}}},
            {"eval", {{"retriever", retriever}, {"k", eval_k}, {"k1", bm25.k1}, {"b", bm25.b}}},
            {"gateway",
             {{"chat", profile_json(chat)},
              {"embed", profile_json(embed.profile)},
              {"tagger", tagger ? profile_json(*tagger) : json(nullptr)}}}};
  return j;
}

PipelineConfig parse_config(std::string_view toml_text, const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at " << e.source().begin;
    throw Error(ErrorKind::config, msg.str());
  }
  check_keys(root, "root",
             {"seed", "workers", "mock", "paths", "chunk", "terms", "select", "generate", "translate", "audit", "eval",
              "gateway"});

  PipelineConfig cfg;
  read(&root, "seed", cfg.seed);
  read(&root, "workers", cfg.workers);
  read(&root, "mock", cfg.mock);

  if (const auto* t = sub(root, "paths")) {
    check_keys(*t, "paths", {"manifest", "freq", "labels", "work_dir"});
    read_path(t, "manifest", base_dir, cfg.paths.manifest);
    read_path(t, "freq", base_dir, cfg.paths.freq);
    read_path(t, "labels", base_dir, cfg.paths.labels);
    read_path(t, "work_dir", base_dir, cfg.paths.work_dir);
  }
  if (cfg.paths.work_dir.is_relative()) cfg.paths.work_dir = (base_dir / cfg.paths.work_dir).lexically_normal();

  if (const auto* t = sub(root, "chunk")) {
    check_keys(*t, "chunk", {"size", "overlap"});
    read(t, "size", cfg.chunk.chunk_size);
    read(t, "overlap", cfg.chunk.overlap);
  }
  if (const auto* t = sub(root, "terms")) {
    check_keys(*t, "terms", {"min_doc_frequency", "zipf_threshold"});
    read(t, "min_doc_frequency", cfg.terms.min_doc_frequency);
    read(t, "zipf_threshold", cfg.terms.zipf_threshold);
  }
  if (const auto* t = sub(root, "select")) {
    check_keys(*t, "select", {"k", "per_medoid", "min_distinct", "sample"});
    read(t, "k", cfg.cluster.k);
    read(t, "per_medoid", cfg.cluster.per_medoid);
    read(t, "min_distinct", cfg.min_distinct);
    read(t, "sample", cfg.sample);
  }
  if (const auto* t = sub(root, "generate")) {
    check_keys(*t, "generate", {"max_repairs", "temperature", "context_window"});
    read(t, "max_repairs", cfg.generation.max_repairs);
    read(t, "temperature", cfg.generation.temperature);
    read(t, "context_window", cfg.context_window);
  }
  if (const auto* t = sub(root, "translate")) {
    check_keys(*t, "translate", {"languages", "max_repairs"});
    if (const auto* node = t->get("languages")) {
      const auto* arr = node->as_array();
      if (!arr) throw Error(ErrorKind::config, "translate.languages must be an array at " + where(*node));
      cfg.languages.clear();
      for (const auto& el : *arr) {
        auto v = el.value<std::string>();
        if (!v) throw Error(ErrorKind::config, "translate.languages entries must be strings");
        cfg.languages.push_back(*v);
      }
    }
    read(t, "max_repairs", cfg.translation.max_repairs);
  }
  if (const auto* t = sub(root, "audit")) {
    check_keys(*t, "audit", {"bt_threshold"});
    read(t, "bt_threshold", cfg.bt_threshold);
  }
  if (const auto* t = sub(root, "eval")) {
    check_keys(*t, "eval", {"retriever", "k", "k1", "b"});
    read(t, "retriever", cfg.retriever);
    read(t, "k", cfg.eval_k);
    read(t, "k1", cfg.bm25.k1);
    read(t, "b", cfg.bm25.b);
  }
  if (const auto* g = sub(root, "gateway")) {
    check_keys(*g, "gateway", {"chat", "embed", "tagger"});
    if (const auto* t = sub(*g, "chat")) cfg.chat = read_profile(*t, "gateway.chat", "chat");
    if (const auto* t = sub(*g, "embed")) {
      cfg.embed.profile =
          read_profile(*t, "gateway.embed", "embeddings", &cfg.embed.query_prefix, &cfg.embed.passage_prefix);
    }
    if (const auto* t = sub(*g, "tagger")) cfg.tagger = read_profile(*t, "gateway.tagger", "tagging");
  }

  // One seed for every stochastic component.
  cfg.cluster.seed = cfg.seed;
  cfg.chat.gateway.seed = cfg.seed;
  cfg.embed.profile.gateway.seed = cfg.seed;
  if (cfg.tagger) cfg.tagger->gateway.seed = cfg.seed;

  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  const auto text = io::read_file(path);
  return parse_config(text, fs::absolute(path).parent_path());
}

Clients make_clients(const PipelineConfig& cfg) {
  Clients c;
  std::shared_ptr<gateway::ChatTransport> transport;
  if (cfg.mock || cfg.chat.kind == "mock") {
    transport = std::make_shared<gateway::SimulatedChatTransport>();
  } else {
    transport = std::make_shared<gateway::HttpChatTransport>(cfg.chat);
  }
  c.chat = std::make_shared<gateway::ChatGateway>(transport, cfg.chat.gateway);

  auto embed = cfg.embed.profile;
  if (cfg.mock) embed.kind = "mock";
  c.embedder = gateway::make_embedder(embed);
  c.tagger = gateway::make_tagger(cfg.mock ? std::nullopt : cfg.tagger);
  return c;
}

}  // namespace stella::pipeline
