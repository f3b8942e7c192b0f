#include <httplib.h>
#include <json.hpp>

#include "planeval/embedding.hpp"

namespace planeval {

RemoteEmbedder::RemoteEmbedder(std::string base_url, int timeout_sec)
    : base_url_(std::move(base_url)), timeout_sec_(timeout_sec) {
  if (base_url_.empty()) {
    throw Error(ErrorCode::InvalidConfig, "remote embedder requires a base URL");
  }
}

RemoteEmbedder::~RemoteEmbedder() = default;

EmbeddingVector RemoteEmbedder::embed(const std::string& text) {
  const std::string texts[] = {text};
  return embed_batch(texts).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) {
  if (texts.empty()) return {};

  nlohmann::json body;
  body["texts"] = nlohmann::json::array();
  for (const auto& t : texts) body["texts"].push_back(t);

  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_sec_, 0);
  client.set_read_timeout(timeout_sec_, 0);

  auto res = client.Post("/embed", body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::EmbeddingProviderFailure,
                "no response from embedding service at " + base_url_);
  }
  if (res->status != 200) {
    throw Error(ErrorCode::EmbeddingProviderFailure,
                "embedding service returned HTTP " + std::to_string(res->status));
  }

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::EmbeddingProviderFailure,
                std::string("malformed embedding response: ") + e.what());
  }
  if (!reply.contains("vectors") || !reply.contains("dimension") ||
      !reply["vectors"].is_array() || !reply["dimension"].is_number_integer()) {
    throw Error(ErrorCode::EmbeddingProviderFailure,
                "embedding response lacks vectors/dimension fields");
  }

  const int dim = reply["dimension"].get<int>();
  if (dim <= 0) {
    throw Error(ErrorCode::EmbeddingProviderFailure, "embedding service reported dimension <= 0");
  }
  if (dimension_ == 0) {
    dimension_ = dim;
  } else if (dim != dimension_) {
    throw Error(ErrorCode::EmbeddingProviderFailure,
                "embedding dimension drifted from " + std::to_string(dimension_) + " to " +
                    std::to_string(dim));
  }
  if (reply["vectors"].size() != texts.size()) {
    throw Error(ErrorCode::EmbeddingProviderFailure,
                "embedding service returned " + std::to_string(reply["vectors"].size()) +
                    " vectors for " + std::to_string(texts.size()) + " texts");
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& jvec : reply["vectors"]) {
    EmbeddingVector v;
    v.reserve(static_cast<std::size_t>(dim));
    for (const auto& x : jvec) {
      if (!x.is_number()) {
        throw Error(ErrorCode::EmbeddingProviderFailure, "non-numeric embedding coordinate");
      }
      v.push_back(x.get<double>());
    }
    if (static_cast<int>(v.size()) != dim) {
      throw Error(ErrorCode::EmbeddingProviderFailure, "vector length disagrees with dimension");
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace planeval
