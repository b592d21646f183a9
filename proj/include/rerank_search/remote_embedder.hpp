#pragma once

#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rerank_search/embedder.hpp"
#include "rerank_search/http.hpp"

namespace rerank_search {

inline constexpr std::size_t kMaxEmbedBatch = 64;
inline constexpr std::string_view kRemoteProviderId = "openai-compatible";
inline constexpr std::string_view kDefaultEmbedModel = "text-embedding-ada-002";

/// One POST {endpoint}/v1/embeddings call for at most kMaxEmbedBatch texts.
/// Vectors come back in input order, matched by the response's index field.
std::vector<EmbeddingVector> remote_embed_batch(JsonHttpClient& client, const std::string& model,
                                                std::span<const std::string> texts);

class RemoteEmbedder final : public EmbeddingProvider {
 public:
  RemoteEmbedder(std::string endpoint, std::string model, std::string api_key, RetryPolicy retry = {});

  EmbeddingVector embed_one(std::string_view text) override;
  /// Splits into kMaxEmbedBatch-sized requests, sent concurrently.
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

  std::optional<std::size_t> dim() const override;
  std::string model_id() const override { return model_; }
  std::string provider_id() const override { return std::string(kRemoteProviderId); }

  int retries() const noexcept { return client_.retries(); }

 private:
  void check_dim(const std::vector<EmbeddingVector>& vectors);

  std::string model_;
  JsonHttpClient client_;
  mutable std::mutex mu_;
  std::optional<std::size_t> dim_;
};

}  // namespace rerank_search
