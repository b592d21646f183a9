#include "rerank_search/remote_embedder.hpp"

#include <cmath>
#include <future>

#include "rerank_search/error.hpp"

namespace rerank_search {

std::vector<EmbeddingVector> remote_embed_batch(JsonHttpClient& client, const std::string& model,
                                                std::span<const std::string> texts) {
  if (texts.empty()) throw Error(ErrorCode::EmptyInput, "embedding batch is empty");
  if (texts.size() > kMaxEmbedBatch) {
    throw Error(ErrorCode::InvalidArgument, "embedding batch of " + std::to_string(texts.size()) + " exceeds " +
                                                std::to_string(kMaxEmbedBatch));
  }
  for (const auto& t : texts) {
    if (t.empty()) throw Error(ErrorCode::EmptyText, "cannot embed an empty string");
  }

  const nlohmann::json body = {{"model", model}, {"input", texts}};
  const auto reply = client.post("/v1/embeddings", body);

  const auto data = reply.find("data");
  if (data == reply.end() || !data->is_array()) throw Error(ErrorCode::BadResponse, "response has no data array");
  if (data->size() != texts.size()) {
    throw Error(ErrorCode::BadResponse, "expected " + std::to_string(texts.size()) + " embeddings, got " +
                                            std::to_string(data->size()));
  }

  std::vector<std::optional<EmbeddingVector>> slots(texts.size());
  std::optional<std::size_t> dim;
  for (const auto& item : *data) {
    const auto idx = item.find("index");
    const auto emb = item.find("embedding");
    if (idx == item.end() || !idx->is_number_unsigned() || emb == item.end() || !emb->is_array()) {
      throw Error(ErrorCode::BadResponse, "data item lacks index or embedding");
    }
    const auto i = idx->get<std::size_t>();
    if (i >= slots.size() || slots[i]) throw Error(ErrorCode::BadResponse, "bad or repeated index " + std::to_string(i));
    if (emb->empty()) throw Error(ErrorCode::BadResponse, "empty embedding");
    if (dim && *dim != emb->size()) throw Error(ErrorCode::BadResponse, "inconsistent embedding dims in batch");
    dim = emb->size();

    EmbeddingVector v{{}, std::string(kRemoteProviderId), model};
    v.values.reserve(emb->size());
    for (const auto& x : *emb) {
      if (!x.is_number()) throw Error(ErrorCode::BadResponse, "embedding holds a non-number");
      const auto f = x.get<float>();
      if (!std::isfinite(f)) throw Error(ErrorCode::BadResponse, "embedding holds a non-finite value");
      v.values.push_back(f);
    }
    slots[i] = std::move(v);
  }

  std::vector<EmbeddingVector> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

RemoteEmbedder::RemoteEmbedder(std::string endpoint, std::string model, std::string api_key, RetryPolicy retry)
    : model_(std::move(model)), client_(std::move(endpoint), std::move(api_key), std::chrono::seconds(30), retry) {}

EmbeddingVector RemoteEmbedder::embed_one(std::string_view text) {
  const std::string copy(text);
  auto out = remote_embed_batch(client_, model_, std::span(&copy, 1));
  check_dim(out);
  return std::move(out.front());
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) {
  std::vector<std::future<std::vector<EmbeddingVector>>> chunks;
  for (std::size_t start = 0; start < texts.size(); start += kMaxEmbedBatch) {
    const auto chunk = texts.subspan(start, std::min(kMaxEmbedBatch, texts.size() - start));
    chunks.push_back(std::async(std::launch::async, [this, chunk] { return remote_embed_batch(client_, model_, chunk); }));
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto& f : chunks) {
    auto part = f.get();
    check_dim(part);
    for (auto& v : part) out.push_back(std::move(v));
  }
  return out;
}

std::optional<std::size_t> RemoteEmbedder::dim() const {
  std::lock_guard lock(mu_);
  return dim_;
}

void RemoteEmbedder::check_dim(const std::vector<EmbeddingVector>& vectors) {
  std::lock_guard lock(mu_);
  for (const auto& v : vectors) {
    if (!dim_) dim_ = v.dim();
    if (*dim_ != v.dim()) {
      throw Error(ErrorCode::BadResponse, "provider switched dims from " + std::to_string(*dim_) + " to " +
                                              std::to_string(v.dim()));
    }
  }
}

}  // namespace rerank_search
