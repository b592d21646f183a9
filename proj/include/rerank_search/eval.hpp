#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rerank_search/pipeline.hpp"

namespace rerank_search {

enum class QueryCategory { Simple, Complex };

std::string_view to_string(QueryCategory category);
QueryCategory parse_category(std::string_view name);

struct JudgedQuery {
  std::string query_id;
  std::string text;
  QueryCategory category = QueryCategory::Simple;
  std::set<std::string, std::less<>> relevant_ids;
};

/// Reads a JSON array of {"query_id", "text", "category", "relevant_ids"}.
std::vector<JudgedQuery> load_queries(const std::filesystem::path& path);
std::vector<JudgedQuery> queries_from_json(const nlohmann::json& j);

/// Hits among the first min(n, |results|) ids, divided by n.
double precision_at_n(std::span<const std::string> result_ids, const std::set<std::string, std::less<>>& relevant,
                      std::size_t n);

struct EvalRow {
  std::string query_id;
  QueryCategory category = QueryCategory::Simple;
  SearchMode mode = SearchMode::Raw;
  std::size_t k = 0;  // shortlist size in effect
  double precision = 0.0;
  std::vector<std::string> result_ids;
  bool degraded = false;
  StageTimings timings;
};

struct Aggregate {
  SearchMode mode = SearchMode::Raw;
  QueryCategory category = QueryCategory::Simple;
  std::size_t queries = 0;
  double mean_precision = 0.0;
  std::size_t degraded = 0;
  double mean_embed_ms = 0.0;
  double mean_search_ms = 0.0;
  std::optional<double> mean_rerank_ms;
};

struct SweepPoint {
  std::size_t k = 0;
  SearchMode mode = SearchMode::Raw;
  double mean_precision = 0.0;
};

struct EvalReport {
  std::size_t top_n = 0;
  std::size_t shortlist_k = 0;
  std::vector<EvalRow> per_query;      // at shortlist_k, sorted by (query_id, mode)
  std::vector<Aggregate> aggregates;   // per (mode, category) present in per_query
  std::vector<EvalRow> sweep_rows;     // sorted by (query_id, mode, k)
  std::vector<SweepPoint> k_sweep;     // sorted by (k, mode)
};

struct EvalOptions {
  std::vector<SearchMode> modes = {SearchMode::Raw, SearchMode::Assisted};
  std::vector<std::size_t> k_values;  // empty: no sweep
};

/// Throws UnknownRelevantId when a judgment names a record absent from the corpus.
EvalReport run_eval(const Corpus& corpus, const FlatIndex& index, EmbeddingProvider& provider, const ChatClient* chat,
                    const std::vector<JudgedQuery>& queries, const PipelineConfig& config,
                    const EvalOptions& options = {});

/// Mean over rows, summed in row order.
std::vector<Aggregate> aggregate(const std::vector<EvalRow>& rows);

nlohmann::json to_json(const EvalReport& report);
std::string format_table(const EvalReport& report);

}  // namespace rerank_search
