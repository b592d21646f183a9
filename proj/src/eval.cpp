#include "rerank_search/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include <nlohmann/json.hpp>

#include "rerank_search/error.hpp"

namespace rerank_search {
namespace {

nlohmann::json row_json(const EvalRow& r) {
  nlohmann::json t = {{"embed_ms", r.timings.embed_ms}, {"search_ms", r.timings.search_ms}};
  if (r.timings.rerank_ms) t["rerank_ms"] = *r.timings.rerank_ms;
  return {{"query_id", r.query_id}, {"category", to_string(r.category)}, {"mode", to_string(r.mode)},
          {"k", r.k},               {"precision_at_n", r.precision},       {"result_ids", r.result_ids},
          {"degraded", r.degraded}, {"timings", t}};
}

void sort_rows(std::vector<EvalRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    return std::tie(a.query_id, a.mode, a.k) < std::tie(b.query_id, b.mode, b.k);
  });
}

}  // namespace

std::string_view to_string(QueryCategory category) { return category == QueryCategory::Simple ? "simple" : "complex"; }

QueryCategory parse_category(std::string_view name) {
  if (name == "simple") return QueryCategory::Simple;
  if (name == "complex") return QueryCategory::Complex;
  throw Error(ErrorCode::InvalidArgument, "unknown query category '" + std::string(name) + "'");
}

std::vector<JudgedQuery> queries_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "queries file must hold a JSON array");
  std::vector<JudgedQuery> out;
  std::set<std::string, std::less<>> seen;
  try {
    for (const auto& q : j) {
      JudgedQuery jq;
      jq.query_id = q.at("query_id").get<std::string>();
      jq.text = q.at("text").get<std::string>();
      jq.category = parse_category(q.at("category").get<std::string>());
      for (const auto& id : q.at("relevant_ids")) jq.relevant_ids.insert(id.get<std::string>());
      if (jq.text.empty()) throw Error(ErrorCode::InvalidArgument, "query '" + jq.query_id + "' has empty text");
      if (!seen.insert(jq.query_id).second) throw Error(ErrorCode::InvalidArgument, "query id '" + jq.query_id + "' repeats");
      out.push_back(std::move(jq));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad queries file: ") + e.what());
  }
  return out;
}

std::vector<JudgedQuery> load_queries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, path.string() + " is not valid JSON");
  return queries_from_json(j);
}

double precision_at_n(std::span<const std::string> result_ids, const std::set<std::string, std::less<>>& relevant,
                      std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "precision@n needs n >= 1");
  const auto m = std::min(n, result_ids.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m; ++i) hits += relevant.contains(result_ids[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<Aggregate> aggregate(const std::vector<EvalRow>& rows) {
  std::map<std::pair<SearchMode, QueryCategory>, Aggregate> groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.mode, r.category}];
    g.mode = r.mode;
    g.category = r.category;
    ++g.queries;
    g.mean_precision += r.precision;
    g.degraded += r.degraded ? 1 : 0;
    g.mean_embed_ms += r.timings.embed_ms;
    g.mean_search_ms += r.timings.search_ms;
    if (r.timings.rerank_ms) g.mean_rerank_ms = g.mean_rerank_ms.value_or(0.0) + *r.timings.rerank_ms;
  }
  std::vector<Aggregate> out;
  for (auto& [key, g] : groups) {
    const auto n = static_cast<double>(g.queries);
    g.mean_precision /= n;
    g.mean_embed_ms /= n;
    g.mean_search_ms /= n;
    if (g.mean_rerank_ms) *g.mean_rerank_ms /= n;
    out.push_back(g);
  }
  return out;
}

EvalReport run_eval(const Corpus& corpus, const FlatIndex& index, EmbeddingProvider& provider, const ChatClient* chat,
                    const std::vector<JudgedQuery>& queries, const PipelineConfig& config, const EvalOptions& options) {
  validate(config);
  for (const auto& q : queries) {
    for (const auto& id : q.relevant_ids) {
      if (!corpus.find(id)) {
        throw Error(ErrorCode::UnknownRelevantId, "query '" + q.query_id + "' judges unknown record '" + id + "'");
      }
    }
  }
  for (const auto k : options.k_values) {
    if (k < config.top_n) {
      throw Error(ErrorCode::InvalidArgument, "sweep k=" + std::to_string(k) + " is below top_n=" + std::to_string(config.top_n));
    }
  }

  const SearchPipeline pipeline(index, corpus, provider, chat);
  auto run_one = [&](const JudgedQuery& q, SearchMode mode, std::size_t k) {
    PipelineConfig c = config;
    c.mode = mode;
    c.shortlist_k = k;
    const auto result = pipeline.run(q.text, c);
    EvalRow row;
    row.query_id = q.query_id;
    row.category = q.category;
    row.mode = mode;
    row.k = k;
    row.result_ids = result.ids();
    row.precision = precision_at_n(row.result_ids, q.relevant_ids, config.top_n);
    row.degraded = result.degraded;
    row.timings = result.timings;
    return row;
  };

  EvalReport report;
  report.top_n = config.top_n;
  report.shortlist_k = config.shortlist_k;
  for (const auto& q : queries) {
    for (const auto mode : options.modes) {
      report.per_query.push_back(run_one(q, mode, config.shortlist_k));
      for (const auto k : options.k_values) report.sweep_rows.push_back(run_one(q, mode, k));
    }
  }
  sort_rows(report.per_query);
  sort_rows(report.sweep_rows);
  report.aggregates = aggregate(report.per_query);

  std::map<std::pair<std::size_t, SearchMode>, std::pair<double, std::size_t>> sweep;
  for (const auto& r : report.sweep_rows) {
    auto& [sum, n] = sweep[{r.k, r.mode}];
    sum += r.precision;
    ++n;
  }
  for (const auto& [key, acc] : sweep) {
    report.k_sweep.push_back({key.first, key.second, acc.first / static_cast<double>(acc.second)});
  }
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["top_n"] = report.top_n;
  j["shortlist_k"] = report.shortlist_k;
  auto& rows = j["per_query"] = nlohmann::json::array();
  for (const auto& r : report.per_query) rows.push_back(row_json(r));

  auto& aggs = j["aggregates"] = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    nlohmann::json t = {{"mean_embed_ms", a.mean_embed_ms}, {"mean_search_ms", a.mean_search_ms}};
    if (a.mean_rerank_ms) t["mean_rerank_ms"] = *a.mean_rerank_ms;
    aggs.push_back({{"mode", to_string(a.mode)},
                    {"category", to_string(a.category)},
                    {"queries", a.queries},
                    {"mean_precision_at_n", a.mean_precision},
                    {"degraded", a.degraded},
                    {"timings", t}});
  }

  if (!report.k_sweep.empty()) {
    auto& sweep_rows = j["sweep_rows"] = nlohmann::json::array();
    for (const auto& r : report.sweep_rows) sweep_rows.push_back(row_json(r));
    auto& sweep = j["k_sweep"] = nlohmann::json::array();
    for (const auto& p : report.k_sweep) {
      sweep.push_back({{"k", p.k}, {"mode", to_string(p.mode)}, {"mean_precision_at_n", p.mean_precision}});
    }
  }
  return j;
}

std::string format_table(const EvalReport& report) {
  std::string out;
  char line[256];
  const auto p_at = "P@" + std::to_string(report.top_n);
  std::snprintf(line, sizeof line, "%-9s %-8s %7s %8s %9s %9s %10s %10s\n", "mode", "category", "queries", p_at.c_str(),
                "degraded", "embed_ms", "search_ms", "rerank_ms");
  out += line;
  for (const auto& a : report.aggregates) {
    char rerank[32] = "-";
    if (a.mean_rerank_ms) std::snprintf(rerank, sizeof rerank, "%.3f", *a.mean_rerank_ms);
    std::snprintf(line, sizeof line, "%-9s %-8s %7zu %8.3f %9zu %9.3f %10.3f %10s\n", std::string(to_string(a.mode)).c_str(),
                  std::string(to_string(a.category)).c_str(), a.queries, a.mean_precision, a.degraded, a.mean_embed_ms,
                  a.mean_search_ms, rerank);
    out += line;
  }
  if (!report.k_sweep.empty()) {
    out += "\nshortlist sweep (mean " + p_at + ")\n";
    for (const auto& p : report.k_sweep) {
      std::snprintf(line, sizeof line, "  k=%-4zu %-9s %.3f\n", p.k, std::string(to_string(p.mode)).c_str(),
                    p.mean_precision);
      out += line;
    }
  }
  return out;
}

}  // namespace rerank_search
