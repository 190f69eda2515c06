#include "stella/gateway/embedder.hpp"

#include <cmath>

#include "stella/error.hpp"
#include "stella/kernels/vector_ops.hpp"
#include "stella/text.hpp"

namespace stella::gateway {

std::vector<EmbeddingVector> Embedder::embed(const std::vector<std::string>& texts) {
  require(!texts.empty(), "embed: empty batch");
  require(texts.size() <= max_batch(), "embed: batch of " + std::to_string(texts.size()) +
                                           " exceeds maximum " + std::to_string(max_batch()));
  for (const auto& t : texts) require(!text::trim(t).empty(), "embed: empty text in batch");

  auto raw = embed_batch(texts);
  if (raw.size() != texts.size()) {
    throw Error(ErrorKind::malformed_response, "embed: provider returned " +
                                                   std::to_string(raw.size()) + " vectors for " +
                                                   std::to_string(texts.size()) + " texts");
  }
  const auto id = provider_id();
  std::vector<EmbeddingVector> out;
  out.reserve(raw.size());
  std::lock_guard lock(mutex_);
  for (auto& values : raw) {
    if (!dimension_) dimension_ = values.size();
    if (values.size() != *dimension_ || values.empty()) {
      throw Error(ErrorKind::dimension_mismatch,
                  "embed: dimension " + std::to_string(values.size()) + ", expected " +
                      std::to_string(*dimension_));
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw Error(ErrorKind::malformed_response, "embed: non-finite value");
    }
    out.push_back({std::move(values), id});
  }
  return out;
}

std::vector<EmbeddingVector> Embedder::embed_all(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  const auto step = max_batch();
  for (std::size_t i = 0; i < texts.size(); i += step) {
    std::vector<std::string> batch(texts.begin() + static_cast<std::ptrdiff_t>(i),
                                   texts.begin() + static_cast<std::ptrdiff_t>(std::min(i + step, texts.size())));
    auto part = embed(batch);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

HashEmbedder::HashEmbedder(std::size_t dimension, std::size_t max_batch)
    : dimension_(dimension), max_batch_(max_batch) {
  require(dimension_ >= 1, "HashEmbedder: dimension must be positive");
  require(max_batch_ >= 1, "HashEmbedder: max_batch must be positive");
}

std::string HashEmbedder::provider_id() const { return "hash-" + std::to_string(dimension_); }

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<std::vector<double>> HashEmbedder::embed_batch(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<double> v(dimension_, 0.0);
    std::string token;
    bool any = false;
    auto flush = [&] {
      if (token.empty()) return;
      const auto h = fnv1a(token);
      v[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
      // second probe keeps collisions from cancelling whole tokens
      const auto h2 = h * 0x9E3779B97F4A7C15ULL;
      v[(h2 >> 7) % dimension_] += (h2 >> 62 & 1) ? -0.5 : 0.5;
      any = true;
      token.clear();
    };
    for (char c : t) {
      const auto u = static_cast<unsigned char>(c);
      if (text::is_ascii_alpha(c) || text::is_ascii_digit(c) || u >= 0x80) {
        token.push_back(text::is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c);
      } else {
        flush();
      }
    }
    flush();
    if (!any || kernels::squared_norm(v) == 0.0) {
      const auto h = fnv1a(t);
      v[h % dimension_] = 1.0;
    }
    kernels::normalize(v);
    out.push_back(std::move(v));
  }
  return out;
}

std::unique_ptr<Embedder> make_embedder(const ProviderProfile& profile) {
  if (profile.kind == "mock") return std::make_unique<HashEmbedder>(profile.dimension, profile.max_batch);
  return std::make_unique<HttpEmbedder>(profile);
}

}  // namespace stella::gateway
