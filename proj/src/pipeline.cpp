#include "rerank_search/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include <nlohmann/json.hpp>

#include "rerank_search/error.hpp"

namespace rerank_search {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

std::string_view to_string(SearchMode mode) { return mode == SearchMode::Raw ? "raw" : "assisted"; }

SearchMode parse_mode(std::string_view name) {
  if (name == "raw") return SearchMode::Raw;
  if (name == "assisted") return SearchMode::Assisted;
  throw Error(ErrorCode::InvalidArgument, "unknown mode '" + std::string(name) + "'");
}

void validate(const PipelineConfig& config) {
  if (config.top_n == 0) throw Error(ErrorCode::InvalidArgument, "top_n must be at least 1");
  if (config.shortlist_k == 0) throw Error(ErrorCode::InvalidArgument, "shortlist_k must be at least 1");
  if (config.top_n > config.shortlist_k) {
    throw Error(ErrorCode::InvalidArgument, "top_n (" + std::to_string(config.top_n) + ") exceeds shortlist_k (" +
                                                std::to_string(config.shortlist_k) + ")");
  }
}

std::vector<std::string> SearchResult::ids() const {
  std::vector<std::string> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(r.record_id);
  return out;
}

nlohmann::json to_json(const SearchResult& result) {
  nlohmann::json j;
  j["mode"] = to_string(result.mode);
  j["degraded"] = result.degraded;
  j["degraded_reason"] = result.degraded_reason ? nlohmann::json(to_string(*result.degraded_reason)) : nlohmann::json();
  auto& rows = j["results"] = nlohmann::json::array();
  for (const auto& r : result.results) {
    rows.push_back({{"rank", r.rank},
                    {"record_id", r.record_id},
                    {"document", r.document},
                    {"stage1_score", r.stage1_score ? nlohmann::json(*r.stage1_score) : nlohmann::json()}});
  }
  j["timings"] = {{"embed_ms", result.timings.embed_ms}, {"search_ms", result.timings.search_ms}};
  if (result.timings.rerank_ms) j["timings"]["rerank_ms"] = *result.timings.rerank_ms;
  return j;
}

SearchPipeline::SearchPipeline(const FlatIndex& index, const Corpus& corpus, EmbeddingProvider& provider,
                               const ChatClient* chat)
    : index_(index), corpus_(corpus), provider_(provider), chat_(chat) {}

EmbeddingVector SearchPipeline::embed_query(std::string_view query) const {
  if (provider_.model_id() != index_.model_id()) {
    throw Error(ErrorCode::ModelMismatch, "index was built with '" + index_.model_id() + "' but queries use '" +
                                              provider_.model_id() + "'");
  }
  return provider_.embed_one(query);
}

ResultRow SearchPipeline::row(std::size_t rank, const std::string& id, std::optional<float> score) const {
  const auto* rec = corpus_.find(id);
  return {rank, id, rec ? rec->document() : std::string(), score};
}

Shortlist SearchPipeline::shortlist(std::string_view query, std::size_t k) const {
  return index_.search(embed_query(query), k);
}

SearchResult SearchPipeline::raw_search(std::string_view query, const PipelineConfig& config) const {
  validate(config);
  SearchResult out;
  out.mode = SearchMode::Raw;

  auto t0 = Clock::now();
  const auto qvec = embed_query(query);
  out.timings.embed_ms = ms_since(t0);

  t0 = Clock::now();
  const auto matches = index_.search(qvec, config.top_n);
  out.timings.search_ms = ms_since(t0);

  for (const auto& m : matches) out.results.push_back(row(m.rank, m.record_id, m.score));
  return out;
}

SearchResult SearchPipeline::assisted_search(std::string_view query, const PipelineConfig& config) const {
  validate(config);
  if (!chat_) throw Error(ErrorCode::InvalidArgument, "assisted search needs a chat client");
  SearchResult out;
  out.mode = SearchMode::Assisted;

  auto t0 = Clock::now();
  const auto qvec = embed_query(query);
  out.timings.embed_ms = ms_since(t0);

  t0 = Clock::now();
  const auto matches = index_.search(qvec, config.shortlist_k);
  out.timings.search_ms = ms_since(t0);

  RerankRequest request{std::string(query), {}, config.top_n};
  request.candidates.reserve(matches.size());
  for (const auto& m : matches) {
    const auto* rec = corpus_.find(m.record_id);
    request.candidates.push_back({m.record_id, rec ? rec->document() : std::string()});
  }

  t0 = Clock::now();
  auto outcome = rerank(request, *chat_);
  out.timings.rerank_ms = ms_since(t0);

  auto selected = std::move(outcome.selected);
  if (config.pad_to_n) {
    for (const auto& m : matches) {
      if (selected.size() >= config.top_n) break;
      if (std::find(selected.begin(), selected.end(), m.record_id) == selected.end()) selected.push_back(m.record_id);
    }
  }

  out.degraded = outcome.degraded;
  out.degraded_reason = outcome.degraded_reason;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto it = std::find_if(matches.begin(), matches.end(), [&](const auto& m) { return m.record_id == selected[i]; });
    out.results.push_back(row(i + 1, selected[i], it == matches.end() ? std::nullopt : std::optional(it->score)));
  }
  return out;
}

SearchResult SearchPipeline::run(std::string_view query, const PipelineConfig& config) const {
  return config.mode == SearchMode::Raw ? raw_search(query, config) : assisted_search(query, config);
}

}  // namespace rerank_search
