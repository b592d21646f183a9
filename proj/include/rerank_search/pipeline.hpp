#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rerank_search/embedder.hpp"
#include "rerank_search/index.hpp"
#include "rerank_search/ingest.hpp"
#include "rerank_search/reranker.hpp"

namespace rerank_search {

enum class SearchMode { Raw, Assisted };

std::string_view to_string(SearchMode mode);
SearchMode parse_mode(std::string_view name);

struct PipelineConfig {
  std::size_t shortlist_k = 15;
  std::size_t top_n = 3;
  SearchMode mode = SearchMode::Assisted;
  /// Refill short LLM selections from shortlist order.
  bool pad_to_n = false;
};

/// Throws InvalidArgument unless 1 <= top_n <= shortlist_k.
void validate(const PipelineConfig& config);

struct ResultRow {
  std::size_t rank = 0;
  std::string record_id;
  std::string document;
  std::optional<float> stage1_score;
};

struct StageTimings {
  double embed_ms = 0.0;
  double search_ms = 0.0;
  std::optional<double> rerank_ms;
};

struct SearchResult {
  std::vector<ResultRow> results;
  SearchMode mode = SearchMode::Raw;
  bool degraded = false;
  std::optional<DegradedReason> degraded_reason;
  StageTimings timings;

  std::vector<std::string> ids() const;
};

nlohmann::json to_json(const SearchResult& result);

/// Embed, shortlist and (in assisted mode) rerank over one immutable index.
/// Holds references only; everything it points at must outlive it.
class SearchPipeline {
 public:
  SearchPipeline(const FlatIndex& index, const Corpus& corpus, EmbeddingProvider& provider,
                 const ChatClient* chat = nullptr);

  SearchResult raw_search(std::string_view query, const PipelineConfig& config) const;
  SearchResult assisted_search(std::string_view query, const PipelineConfig& config) const;
  /// Dispatches on config.mode.
  SearchResult run(std::string_view query, const PipelineConfig& config) const;

  /// Stage 1 alone: the k-shortlist for a query.
  Shortlist shortlist(std::string_view query, std::size_t k) const;

 private:
  EmbeddingVector embed_query(std::string_view query) const;
  ResultRow row(std::size_t rank, const std::string& id, std::optional<float> score) const;

  const FlatIndex& index_;
  const Corpus& corpus_;
  EmbeddingProvider& provider_;
  const ChatClient* chat_;
};

}  // namespace rerank_search
