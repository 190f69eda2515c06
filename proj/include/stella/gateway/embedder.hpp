#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "stella/gateway/types.hpp"

namespace stella::gateway {

class Embedder {
 public:
  virtual ~Embedder() = default;

  // One vector per text in input order. Throws Error(precondition) for empty
  // texts or an oversized batch, Error(dimension_mismatch) when the provider
  // changes dimension within a batch or across calls.
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

  // embed() in max_batch() sized slices.
  std::vector<EmbeddingVector> embed_all(const std::vector<std::string>& texts);

  virtual std::size_t max_batch() const = 0;
  virtual std::string provider_id() const = 0;

 protected:
  virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) = 0;

 private:
  std::mutex mutex_;
  std::optional<std::size_t> dimension_;
};

// Feature-hashing embedder: lowercase word tokens hashed into a signed
// bag-of-words vector, L2-normalized. Deterministic and dependency-free.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 64, std::size_t max_batch = 256);

  std::size_t max_batch() const override { return max_batch_; }
  std::string provider_id() const override;

 protected:
  std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override;

 private:
  std::size_t dimension_;
  std::size_t max_batch_;
};

// OpenAI-style /v1/embeddings or sidecar /embed over HTTP.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(ProviderProfile profile);

  std::size_t max_batch() const override { return profile_.max_batch; }
  std::string provider_id() const override;

 protected:
  std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override;

 private:
  ProviderProfile profile_;
};

std::unique_ptr<Embedder> make_embedder(const ProviderProfile& profile);

}  // namespace stella::gateway
