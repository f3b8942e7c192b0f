#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "planeval/error.hpp"

namespace planeval {

using EmbeddingVector = std::vector<double>;

// Text-embedding provider contract. Implementations must be deterministic
// for a fixed provider and input, with a fixed dimension per provider.
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual EmbeddingVector embed(const std::string& text) = 0;
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);
  virtual int dimension() const = 0;
  virtual std::string provider_id() const = 0;
};

// Offline signed-hash bag-of-tokens embedder: lowercase, split on
// non-alphanumeric runs, FNV-1a 64 per token, bucket = hash % dimension,
// sign from the next hash bit, L2-normalized (zero vector stays zero).
class FallbackEmbedder final : public Embedder {
 public:
  explicit FallbackEmbedder(int dimension = 256);

  EmbeddingVector embed(const std::string& text) override;
  int dimension() const override { return dimension_; }
  std::string provider_id() const override;

 private:
  int dimension_;
};

// Client for an external embedding service:
//   POST {base_url}/embed  {"texts": [...]}  ->  {"vectors": [[...]...], "dimension": n}
// Any failure (transport, malformed body, count or dimension drift) surfaces
// as EmbeddingProviderFailure.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string base_url, int timeout_sec = 30);
  ~RemoteEmbedder() override;

  EmbeddingVector embed(const std::string& text) override;
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;
  int dimension() const override { return dimension_; }
  std::string provider_id() const override { return "remote:" + base_url_; }

 private:
  std::string base_url_;
  int timeout_sec_;
  int dimension_ = 0;  // pinned by the first response; drift is an error
};

// dot(a,b) / (|a||b|); 0 if either norm is 0. Throws DimensionMismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace planeval
