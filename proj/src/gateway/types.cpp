#include "stella/gateway/types.hpp"

#include "stella/error.hpp"
#include "stella/text.hpp"

namespace stella::gateway {

void ChatRequest::validate() const {
  require(!text::trim(system_prompt).empty(), "ChatRequest: system_prompt is empty");
  require(!text::trim(user_prompt).empty(), "ChatRequest: user_prompt is empty");
  require(temperature >= 0.0 && temperature <= 2.0, "ChatRequest: temperature outside [0, 2]");
  require(max_output_tokens >= 1, "ChatRequest: max_output_tokens must be >= 1");
}

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::noun: return "NOUN";
    case PosTag::propn: return "PROPN";
    case PosTag::other: return "OTHER";
  }
  return "OTHER";
}

std::optional<PosTag> parse_pos_tag(std::string_view s) {
  if (s == "NOUN") return PosTag::noun;
  if (s == "PROPN") return PosTag::propn;
  if (s == "OTHER") return PosTag::other;
  return std::nullopt;
}

void GatewayConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::config, "GatewayConfig: " + what); };
  if (max_concurrent < 1) fail("max_concurrent must be >= 1");
  if (retry_limit < 0 || retry_limit > 10) fail("retry_limit must be in [0, 10]");
  if (backoff_base_ms < 1) fail("backoff_base_ms must be positive");
  if (timeout_ms < 1) fail("timeout_ms must be positive");
}

}  // namespace stella::gateway
