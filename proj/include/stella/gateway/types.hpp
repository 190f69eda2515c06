#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stella::gateway {

enum class ResponseFormat { free_text, json_object };

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  ResponseFormat response_format = ResponseFormat::free_text;

  // Throws Error(precondition): empty prompts, temperature outside [0, 2],
  // max_output_tokens < 1.
  void validate() const;
};

// Temperatures used per call family.
inline constexpr double kClassificationTemperature = 0.0;
inline constexpr double kGenerationTemperature = 0.7;

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_id;

  std::size_t dimension() const { return values.size(); }
};

enum class PosTag { noun, propn, other };

std::string_view to_string(PosTag tag);
std::optional<PosTag> parse_pos_tag(std::string_view s);

struct GatewayConfig {
  std::string endpoint_url;
  std::string api_key;
  int max_concurrent = 4;
  int retry_limit = 3;
  int backoff_base_ms = 200;
  int timeout_ms = 60000;
  std::uint64_t seed = 0;  // jitter RNG

  // Throws Error(config) when retry_limit > 10 or max_concurrent < 1, or any
  // of the positive fields is not positive.
  void validate() const;
};

// How to reach one provider (chat, embedding or tagging endpoint).
struct ProviderProfile {
  std::string kind = "mock";  // "openai", "sidecar" or "mock"
  std::string path;           // request path; defaults per kind and role
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  std::string model;
  std::size_t max_batch = 64;
  std::size_t dimension = 64;  // mock embedder only
  GatewayConfig gateway;
};

}  // namespace stella::gateway
