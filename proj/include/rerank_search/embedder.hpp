#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rerank_search {

struct EmbeddingVector {
  std::vector<float> values;
  std::string provider_id;
  std::string model_id;

  std::size_t dim() const noexcept { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// Anything that turns text into vectors of one fixed dimension.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual EmbeddingVector embed_one(std::string_view text) = 0;
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;

  /// Empty until known; remote providers learn it from the first response.
  virtual std::optional<std::size_t> dim() const = 0;
  virtual std::string model_id() const = 0;
  virtual std::string provider_id() const = 0;
};

inline constexpr std::size_t kDefaultLocalDim = 256;
inline constexpr std::string_view kLocalProviderId = "local";
inline constexpr std::string_view kLocalModelPrefix = "local-fnv";

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// ASCII-lowercased tokens split on every byte that is not [a-z0-9] or >= 0x80.
std::vector<std::string> tokenize(std::string_view text);

/// Unigrams followed by adjacent bigrams ("a b").
std::vector<std::string> hashing_features(std::string_view text);

/// Signed feature hashing into `dim` buckets, then L2 normalization in float.
/// Throws EmptyText when no token survives.
EmbeddingVector local_embed(std::string_view text, std::size_t dim = kDefaultLocalDim);

std::string local_model_id(std::size_t dim);
/// Inverse of local_model_id; empty when the id names some other model.
std::optional<std::size_t> parse_local_model_id(std::string_view model_id);

class LocalEmbedder final : public EmbeddingProvider {
 public:
  explicit LocalEmbedder(std::size_t dim = kDefaultLocalDim);

  EmbeddingVector embed_one(std::string_view text) override { return local_embed(text, dim_); }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

  std::optional<std::size_t> dim() const override { return dim_; }
  std::string model_id() const override { return local_model_id(dim_); }
  std::string provider_id() const override { return std::string(kLocalProviderId); }

 private:
  std::size_t dim_;
};

}  // namespace rerank_search
