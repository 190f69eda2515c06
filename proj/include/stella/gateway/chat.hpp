#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stella/error.hpp"
#include "stella/gateway/types.hpp"

namespace stella::gateway {

// One round trip to a chat model. Implementations throw Error(transport)
// or Error(rate_limited) on failure; they never retry themselves.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

enum class AttemptOutcome { ok, transport_error, rate_limited, malformed };

std::string_view to_string(AttemptOutcome outcome);

struct CallLogEntry {
  std::size_t call_id = 0;  // one per chat() invocation
  int attempt = 0;          // 1-based within the call
  std::string request_digest;
  AttemptOutcome outcome = AttemptOutcome::ok;
};

// Retrying, concurrency-capped front end over a transport. Thread-safe.
class ChatGateway {
 public:
  ChatGateway(std::shared_ptr<ChatTransport> transport, GatewayConfig config);

  // Returns the model text. With ResponseFormat::json_object the result is
  // one JSON object (markdown fences stripped); otherwise the call is retried
  // up to retry_limit times and then fails with Error(malformed_response).
  std::string chat(const ChatRequest& request);

  std::vector<CallLogEntry> call_log() const;
  std::size_t max_in_flight() const;
  const GatewayConfig& config() const { return config_; }

 private:
  void admit();
  void release();
  void backoff(int attempt);
  void log(std::size_t call_id, int attempt, const std::string& digest, AttemptOutcome outcome);

  std::shared_ptr<ChatTransport> transport_;
  GatewayConfig config_;

  mutable std::mutex mutex_;
  std::condition_variable slot_free_;
  int in_flight_ = 0;
  std::size_t max_in_flight_ = 0;
  std::size_t next_call_id_ = 0;
  std::vector<CallLogEntry> log_;
  std::mt19937_64 jitter_;
};

// Extracts a single JSON object from model text: trims whitespace and an
// enclosing ``` fence. Returns nullopt when the rest is not one object.
std::optional<std::string> extract_json_object(std::string_view text);

// Scripted transport for tests: returns the scripted items in order and
// repeats the last one when exhausted. Records every request it receives.
class ScriptedChatTransport : public ChatTransport {
 public:
  struct Item {
    std::string text;
    std::optional<ErrorKind> failure;  // throw instead of answering

    static Item reply(std::string text) { return {std::move(text), std::nullopt}; }
    static Item fail(ErrorKind kind) { return {{}, kind}; }
  };

  explicit ScriptedChatTransport(std::vector<Item> script);
  explicit ScriptedChatTransport(const std::vector<std::string>& replies);

  std::string complete(const ChatRequest& request) override;

  std::vector<ChatRequest> requests() const;
  std::size_t calls() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Item> script_;
  std::size_t cursor_ = 0;
  std::vector<ChatRequest> requests_;
};

// Wraps a callable; used for instrumented transports in tests.
class FunctionChatTransport : public ChatTransport {
 public:
  explicit FunctionChatTransport(std::function<std::string(const ChatRequest&)> fn)
      : fn_(std::move(fn)) {}
  std::string complete(const ChatRequest& request) override { return fn_(request); }

 private:
  std::function<std::string(const ChatRequest&)> fn_;
};

// OpenAI-compatible chat completions over HTTP(S).
class HttpChatTransport : public ChatTransport {
 public:
  explicit HttpChatTransport(ProviderProfile profile);
  std::string complete(const ChatRequest& request) override;

 private:
  ProviderProfile profile_;
};

// Deterministic offline stand-in for the chat model that understands the
// pipeline's own prompt templates. Pure function of the request.
class SimulatedChatTransport : public ChatTransport {
 public:
  std::string complete(const ChatRequest& request) override;
};

}  // namespace stella::gateway
