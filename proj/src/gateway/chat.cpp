#include "stella/gateway/chat.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "stella/io.hpp"
#include "stella/text.hpp"

namespace stella::gateway {

std::string_view to_string(AttemptOutcome outcome) {
  switch (outcome) {
    case AttemptOutcome::ok: return "ok";
    case AttemptOutcome::transport_error: return "transport_error";
    case AttemptOutcome::rate_limited: return "rate_limited";
    case AttemptOutcome::malformed: return "malformed";
  }
  return "unknown";
}

std::optional<std::string> extract_json_object(std::string_view raw) {
  auto body = text::trim(raw);
  if (body.starts_with("```")) {
    const auto first_nl = body.find('\n');
    const auto close = body.rfind("```");
    if (first_nl == std::string_view::npos || close <= first_nl) return std::nullopt;
    body = text::trim(body.substr(first_nl + 1, close - first_nl - 1));
  }
  try {
    const auto value = nlohmann::json::parse(body);
    if (!value.is_object()) return std::nullopt;
  } catch (const nlohmann::json::parse_error&) {
    return std::nullopt;
  }
  return std::string(body);
}

ChatGateway::ChatGateway(std::shared_ptr<ChatTransport> transport, GatewayConfig config)
    : transport_(std::move(transport)), config_(std::move(config)), jitter_(config_.seed) {
  require(transport_ != nullptr, "ChatGateway: null transport");
  config_.validate();
}

void ChatGateway::admit() {
  std::unique_lock lock(mutex_);
  slot_free_.wait(lock, [&] { return in_flight_ < config_.max_concurrent; });
  ++in_flight_;
  max_in_flight_ = std::max(max_in_flight_, static_cast<std::size_t>(in_flight_));
}

void ChatGateway::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  slot_free_.notify_one();
}

void ChatGateway::backoff(int attempt) {
  double factor;
  {
    std::lock_guard lock(mutex_);
    factor = std::uniform_real_distribution<double>(0.5, 1.0)(jitter_);
  }
  const double ms = config_.backoff_base_ms * std::ldexp(1.0, attempt - 1) * factor;
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

void ChatGateway::log(std::size_t call_id, int attempt, const std::string& digest,
                      AttemptOutcome outcome) {
  std::lock_guard lock(mutex_);
  log_.push_back({call_id, attempt, digest, outcome});
}

std::string ChatGateway::chat(const ChatRequest& request) {
  request.validate();
  std::size_t call_id;
  {
    std::lock_guard lock(mutex_);
    call_id = next_call_id_++;
  }
  const auto digest = io::sha256_hex(request.system_prompt + '\0' + request.user_prompt).substr(0, 16);
  const int max_attempts = config_.retry_limit + 1;
  ErrorKind last_kind = ErrorKind::transport;
  std::string last_message;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    std::string reply;
    admit();
    try {
      reply = transport_->complete(request);
      release();
    } catch (const Error& e) {
      release();
      if (e.kind() != ErrorKind::transport && e.kind() != ErrorKind::rate_limited) throw;
      last_kind = e.kind();
      last_message = e.what();
      log(call_id, attempt,
          digest, e.kind() == ErrorKind::rate_limited ? AttemptOutcome::rate_limited
                                                      : AttemptOutcome::transport_error);
      if (attempt < max_attempts) backoff(attempt);
      continue;
    } catch (...) {
      release();
      throw;
    }

    if (request.response_format == ResponseFormat::json_object) {
      auto object = extract_json_object(reply);
      if (!object) {
        last_kind = ErrorKind::malformed_response;
        last_message = "response is not a single JSON object";
        log(call_id, attempt, digest, AttemptOutcome::malformed);
        continue;
      }
      log(call_id, attempt, digest, AttemptOutcome::ok);
      return *object;
    }
    log(call_id, attempt, digest, AttemptOutcome::ok);
    return reply;
  }
  throw Error(last_kind, "chat failed after " + std::to_string(max_attempts) +
                             " attempts: " + last_message);
}

std::vector<CallLogEntry> ChatGateway::call_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t ChatGateway::max_in_flight() const {
  std::lock_guard lock(mutex_);
  return max_in_flight_;
}

ScriptedChatTransport::ScriptedChatTransport(std::vector<Item> script) : script_(std::move(script)) {
  require(!script_.empty(), "ScriptedChatTransport: empty script");
}

ScriptedChatTransport::ScriptedChatTransport(const std::vector<std::string>& replies) {
  require(!replies.empty(), "ScriptedChatTransport: empty script");
  for (const auto& r : replies) script_.push_back(Item::reply(r));
}

std::string ScriptedChatTransport::complete(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  requests_.push_back(request);
  const auto& item = script_[std::min(cursor_, script_.size() - 1)];
  ++cursor_;
  if (item.failure) throw Error(*item.failure, "scripted failure");
  return item.text;
}

std::vector<ChatRequest> ScriptedChatTransport::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::size_t ScriptedChatTransport::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

}  // namespace stella::gateway
