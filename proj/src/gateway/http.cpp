#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <thread>

#include <nlohmann/json.hpp>

#include "stella/error.hpp"
#include "stella/gateway/chat.hpp"
#include "stella/gateway/embedder.hpp"
#include "stella/gateway/tagger.hpp"

namespace stella::gateway {

namespace {

using nlohmann::json;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base;    // path prefix without trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::config, "endpoint_url must include a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    ep.base = url.substr(path_start);
    while (!ep.base.empty() && ep.base.back() == '/') ep.base.pop_back();
  }
  return ep;
}

// POSTs JSON, retrying transport failures and 429/5xx with exponential
// backoff. 4xx other than 429 fail immediately.
json post_json(const ProviderProfile& profile, const std::string& default_path, const json& body) {
  const auto& cfg = profile.gateway;
  const auto ep = split_url(cfg.endpoint_url);
  const auto path = ep.base + (profile.path.empty() ? default_path : profile.path);

  httplib::Headers headers;
  if (!cfg.api_key.empty()) headers.emplace(profile.auth_header, profile.auth_prefix + cfg.api_key);

  const auto payload = body.dump();
  ErrorKind last_kind = ErrorKind::transport;
  std::string last_message;
  for (int attempt = 1; attempt <= cfg.retry_limit + 1; ++attempt) {
    httplib::Client client(ep.origin);
    const auto timeout = std::chrono::milliseconds(cfg.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_kind = ErrorKind::transport;
      last_message = "POST " + path + ": " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw Error(ErrorKind::malformed_response, "POST " + path + ": invalid JSON body: " + e.what());
      }
    } else if (res->status == 429) {
      last_kind = ErrorKind::rate_limited;
      last_message = "POST " + path + ": HTTP 429";
    } else if (res->status >= 500) {
      last_kind = ErrorKind::transport;
      last_message = "POST " + path + ": HTTP " + std::to_string(res->status);
    } else {
      throw Error(res->status == 413 ? ErrorKind::precondition : ErrorKind::transport,
                  "POST " + path + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    if (attempt <= cfg.retry_limit) {
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg.backoff_base_ms << (attempt - 1)));
    }
  }
  throw Error(last_kind, last_message);
}

}  // namespace

HttpChatTransport::HttpChatTransport(ProviderProfile profile) : profile_(std::move(profile)) {
  profile_.gateway.validate();
  split_url(profile_.gateway.endpoint_url);
}

std::string HttpChatTransport::complete(const ChatRequest& request) {
  json body = {
      {"model", profile_.model},
      {"messages",
       json::array({{{"role", "system"}, {"content", request.system_prompt}},
                    {{"role", "user"}, {"content", request.user_prompt}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_output_tokens},
  };
  if (request.response_format == ResponseFormat::json_object) {
    body["response_format"] = {{"type", "json_object"}};
  }
  // Retries live in ChatGateway; a single attempt here.
  auto single = profile_;
  single.gateway.retry_limit = 0;
  const auto reply = post_json(single, "/v1/chat/completions", body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::malformed_response, std::string("chat completion schema: ") + e.what());
  }
}

HttpEmbedder::HttpEmbedder(ProviderProfile profile) : profile_(std::move(profile)) {
  profile_.gateway.validate();
  require(profile_.max_batch >= 1, "HttpEmbedder: max_batch must be positive");
}

std::string HttpEmbedder::provider_id() const {
  return profile_.kind + ":" + (profile_.model.empty() ? "default" : profile_.model);
}

std::vector<std::vector<double>> HttpEmbedder::embed_batch(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  try {
    if (profile_.kind == "sidecar") {
      const auto reply = post_json(profile_, "/embed", {{"texts", texts}});
      for (const auto& v : reply.at("vectors")) out.push_back(v.get<std::vector<double>>());
    } else {
      const auto reply = post_json(profile_, "/v1/embeddings", {{"model", profile_.model}, {"input", texts}});
      const auto& data = reply.at("data");
      out.resize(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto index = data[i].value("index", i);
        if (index >= out.size()) throw Error(ErrorKind::malformed_response, "embedding index out of range");
        out[index] = data[i].at("embedding").get<std::vector<double>>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::malformed_response, std::string("embedding response schema: ") + e.what());
  }
  return out;
}

HttpTagger::HttpTagger(ProviderProfile profile) : profile_(std::move(profile)) {
  profile_.gateway.validate();
}

std::vector<PosTag> HttpTagger::tag_tokens(const std::vector<std::string>& tokens) {
  std::vector<PosTag> out;
  try {
    const auto reply = post_json(profile_, "/tag", {{"tokens", tokens}});
    for (const auto& t : reply.at("tags")) {
      auto tag = parse_pos_tag(t.get<std::string>());
      if (!tag) throw Error(ErrorKind::malformed_response, "unknown tag from sidecar: " + t.dump());
      out.push_back(*tag);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::malformed_response, std::string("tag response schema: ") + e.what());
  }
  return out;
}

}  // namespace stella::gateway
