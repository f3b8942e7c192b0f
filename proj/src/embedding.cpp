#include "planeval/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>

namespace planeval {

namespace {

std::uint64_t fnv1a64(std::string_view token) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

FallbackEmbedder::FallbackEmbedder(int dimension) : dimension_(dimension) {
  if (dimension <= 0) {
    throw Error(ErrorCode::InvalidConfig, "embedding dimension must be positive");
  }
}

std::string FallbackEmbedder::provider_id() const {
  return "fallback-hash-" + std::to_string(dimension_);
}

EmbeddingVector FallbackEmbedder::embed(const std::string& text) {
  EmbeddingVector vec(static_cast<std::size_t>(dimension_), 0.0);
  const auto dim = static_cast<std::uint64_t>(dimension_);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = fnv1a64(token);
    const std::uint64_t bucket = h % dim;
    const double sign = ((h / dim) & 1ull) == 0 ? 1.0 : -1.0;
    vec[bucket] += sign;
    token.clear();
  };
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      token.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      flush();
    }
  }
  flush();

  double norm_sq = 0.0;
  for (double v : vec) norm_sq += v * v;
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& v : vec) v *= inv;
  }
  return vec;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "cosine of vectors with dimensions " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace planeval
