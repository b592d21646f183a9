#include "rerank_search/embedder.hpp"

#include <charconv>
#include <cmath>

#include "rerank_search/error.hpp"

namespace rerank_search {
namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || c >= 0x80;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = kFnvOffset;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c + ('a' - 'A'));
    if (is_token_byte(c)) {
      current.push_back(static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> hashing_features(std::string_view text) {
  auto features = tokenize(text);
  const auto unigrams = features.size();
  for (std::size_t i = 1; i < unigrams; ++i) features.push_back(features[i - 1] + ' ' + features[i]);
  return features;
}

EmbeddingVector local_embed(std::string_view text, std::size_t dim) {
  if (dim == 0) throw Error(ErrorCode::InvalidArgument, "embedding dim must be positive");
  const auto features = hashing_features(text);
  if (features.empty()) throw Error(ErrorCode::EmptyText, "no alphanumeric tokens in text");

  std::vector<float> values(dim, 0.0f);
  for (const auto& f : features) {
    const auto h = fnv1a64(f);
    values[h % dim] += (h >> 63) ? -1.0f : 1.0f;
  }

  // float accumulation in bucket order keeps the output bit-reproducible
  float sum_sq = 0.0f;
  for (const float v : values) sum_sq += v * v;
  // every feature cancelled out (e.g. "a b a b" patterns at tiny dims)
  if (sum_sq == 0.0f) throw Error(ErrorCode::EmptyText, "features cancel to a zero vector");
  const float norm = std::sqrt(sum_sq);
  for (float& v : values) v /= norm;

  return {std::move(values), std::string(kLocalProviderId), local_model_id(dim)};
}

std::string local_model_id(std::size_t dim) { return std::string(kLocalModelPrefix) + std::to_string(dim); }

std::optional<std::size_t> parse_local_model_id(std::string_view model_id) {
  if (!model_id.starts_with(kLocalModelPrefix)) return std::nullopt;
  model_id.remove_prefix(kLocalModelPrefix.size());
  std::size_t dim = 0;
  const auto [ptr, ec] = std::from_chars(model_id.data(), model_id.data() + model_id.size(), dim);
  if (ec != std::errc{} || ptr != model_id.data() + model_id.size() || dim == 0) return std::nullopt;
  return dim;
}

LocalEmbedder::LocalEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "embedding dim must be positive");
}

std::vector<EmbeddingVector> LocalEmbedder::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(local_embed(t, dim_));
  return out;
}

}  // namespace rerank_search
