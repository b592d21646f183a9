#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "rerank_search/error.hpp"
#include "rerank_search/eval.hpp"
#include "test_support.hpp"

using namespace rerank_search;
using namespace rerank_search::testing;

namespace {

using IdSet = std::set<std::string, std::less<>>;

double mean_of(const EvalReport& r, SearchMode mode, QueryCategory cat) {
  for (const auto& a : r.aggregates) {
    if (a.mode == mode && a.category == cat) return a.mean_precision;
  }
  ADD_FAILURE() << "missing aggregate";
  return -1;
}

nlohmann::json without_timings(nlohmann::json j) {
  for (auto* key : {"per_query", "sweep_rows"}) {
    if (!j.contains(key)) continue;
    for (auto& row : j[key]) row.erase("timings");
  }
  for (auto& a : j["aggregates"]) a.erase("timings");
  return j;
}

}  // namespace

TEST(Precision, WorkedExamples) {
  const IdSet relevant{"Ocean Park", "Chengdu Research Base"};
  const std::vector<std::string> assisted{"Ocean Park", "Chengdu Research Base", "Mount Hua"};
  const std::vector<std::string> raw{"Ocean Park", "Merlion Park", "Manila Bay"};
  EXPECT_DOUBLE_EQ(precision_at_n(assisted, relevant, 3), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(precision_at_n(raw, relevant, 3), 1.0 / 3.0);
  EXPECT_EQ(precision_at_n(raw, {}, 3), 0.0);
  EXPECT_EQ(precision_at_n({}, relevant, 3), 0.0);
}

TEST(Precision, DenominatorIsN) {
  const IdSet relevant{"a", "b"};
  EXPECT_DOUBLE_EQ(precision_at_n(std::vector<std::string>{"a"}, relevant, 3), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(precision_at_n(std::vector<std::string>{"x", "y", "a", "b"}, relevant, 3), 1.0 / 3.0);
  EXPECT_THROW(precision_at_n(std::vector<std::string>{"a"}, relevant, 0), Error);
}

TEST(Queries, Loading) {
  const auto q = load_queries(data_dir() / "food_qrels.json");
  EXPECT_EQ(q.size(), 12u);
  std::size_t complex = 0;
  for (const auto& x : q) complex += x.category == QueryCategory::Complex;
  EXPECT_EQ(complex, 6u);

  using nlohmann::json;
  EXPECT_THROW(queries_from_json(json::object()), Error);
  EXPECT_THROW(queries_from_json(json::parse(R"([{"query_id":"a","text":"","category":"simple","relevant_ids":[]}])")),
               Error);
  EXPECT_THROW(queries_from_json(json::parse(
                   R"([{"query_id":"a","text":"x","category":"simple","relevant_ids":[]},
                       {"query_id":"a","text":"y","category":"simple","relevant_ids":[]}])")),
               Error);
  EXPECT_THROW(queries_from_json(json::parse(R"([{"query_id":"a","text":"x","category":"odd","relevant_ids":[]}])")),
               Error);
}

TEST(RunEval, AssistedHelpsComplexAndMatchesSimple) {
  for (auto fx : {food_fixture(), tourist_fixture()}) {
    LocalEmbedder emb(kFixtureDim);
    const auto chat = scripted_chat();
    const auto report = run_eval(fx.corpus, fx.index, emb, &chat, fx.queries, {});
    EXPECT_EQ(report.per_query.size(), fx.queries.size() * 2);
    EXPECT_GE(mean_of(report, SearchMode::Assisted, QueryCategory::Complex),
              mean_of(report, SearchMode::Raw, QueryCategory::Complex));
    EXPECT_LE(std::abs(mean_of(report, SearchMode::Assisted, QueryCategory::Simple) -
                       mean_of(report, SearchMode::Raw, QueryCategory::Simple)),
              1.0 / 3.0 + 1e-12);
    for (const auto& row : report.per_query) {
      EXPECT_GE(row.precision, 0.0);
      EXPECT_LE(row.precision, 1.0);
      EXPECT_EQ(row.timings.rerank_ms.has_value(), row.mode == SearchMode::Assisted);
    }
  }
}

TEST(RunEval, RowsSortedAndRawIsShortlistPrefix) {
  auto fx = tourist_fixture();
  LocalEmbedder emb(kFixtureDim);
  const auto chat = scripted_chat();
  const auto report = run_eval(fx.corpus, fx.index, emb, &chat, fx.queries, {});
  for (std::size_t i = 1; i < report.per_query.size(); ++i) {
    const auto& a = report.per_query[i - 1];
    const auto& b = report.per_query[i];
    EXPECT_TRUE(std::tie(a.query_id, a.mode) < std::tie(b.query_id, b.mode));
  }
  SearchPipeline p(fx.index, fx.corpus, emb);
  for (const auto& row : report.per_query) {
    if (row.mode != SearchMode::Raw) continue;
    const auto& q = *std::find_if(fx.queries.begin(), fx.queries.end(), [&](auto& x) { return x.query_id == row.query_id; });
    const auto sl = p.shortlist(q.text, 15);
    for (std::size_t i = 0; i < row.result_ids.size(); ++i) EXPECT_EQ(row.result_ids[i], sl[i].record_id);
  }
}

TEST(RunEval, SweepOnTinyCorpusIsFlat) {
  std::vector<Record> records;
  const std::vector<std::string> cols{"title"};
  for (int i = 0; i < 5; ++i) records.emplace_back(ordinal_id(i + 1), std::vector<Field>{{"title", "soup " + std::to_string(i)}}, cols);
  const Corpus corpus(std::move(records), {std::nullopt, cols});
  LocalEmbedder emb(64);
  const auto index = embed_corpus(corpus, emb);
  const auto chat = scripted_chat();
  const std::vector<JudgedQuery> queries{{"q1", "soup", QueryCategory::Simple, {"r0001", "r0003"}},
                                         {"q2", "soup 4", QueryCategory::Complex, {"r0005"}}};
  const auto report = run_eval(corpus, index, emb, &chat, queries, {}, {{SearchMode::Raw, SearchMode::Assisted}, {5, 15, 50}});
  ASSERT_EQ(report.sweep_rows.size(), 2u * 2u * 3u);
  for (std::size_t i = 0; i < report.sweep_rows.size(); i += 3) {
    const auto& base = report.sweep_rows[i];
    for (std::size_t j = 1; j < 3; ++j) {
      const auto& r = report.sweep_rows[i + j];
      EXPECT_EQ(r.query_id, base.query_id);
      EXPECT_EQ(r.mode, base.mode);
      EXPECT_EQ(r.result_ids, base.result_ids);
      EXPECT_EQ(r.precision, base.precision);
    }
    EXPECT_EQ(report.sweep_rows[i].k, 5u);
    EXPECT_EQ(report.sweep_rows[i + 2].k, 50u);
  }
  ASSERT_EQ(report.k_sweep.size(), 6u);
  EXPECT_EQ(report.k_sweep[0].mean_precision, report.k_sweep[2].mean_precision);
}

TEST(RunEval, SweepBelowTopNRejected) {
  auto fx = tourist_fixture();
  LocalEmbedder emb(kFixtureDim);
  const auto chat = scripted_chat();
  EXPECT_THROW(run_eval(fx.corpus, fx.index, emb, &chat, fx.queries, {}, {{SearchMode::Raw}, {2}}), Error);
}

TEST(RunEval, FailingClientDegradesToRaw) {
  auto fx = food_fixture();
  LocalEmbedder emb(kFixtureDim);
  FailingChatClient failing;
  const auto report = run_eval(fx.corpus, fx.index, emb, &failing, fx.queries, {});
  std::map<std::string, const EvalRow*> raw;
  for (const auto& r : report.per_query) {
    if (r.mode == SearchMode::Raw) raw[r.query_id] = &r;
  }
  for (const auto& r : report.per_query) {
    if (r.mode != SearchMode::Assisted) continue;
    EXPECT_TRUE(r.degraded);
    EXPECT_EQ(r.precision, raw.at(r.query_id)->precision);
    EXPECT_EQ(r.result_ids, raw.at(r.query_id)->result_ids);
  }
  for (const auto& a : report.aggregates) {
    if (a.mode == SearchMode::Assisted) EXPECT_EQ(a.degraded, a.queries);
  }
}

TEST(RunEval, UnknownRelevantId) {
  auto fx = food_fixture();
  LocalEmbedder emb(kFixtureDim);
  auto queries = fx.queries;
  queries[0].relevant_ids.insert("zzz");
  try {
    run_eval(fx.corpus, fx.index, emb, nullptr, queries, {}, {{SearchMode::Raw}, {}});
    FAIL() << "expected UnknownRelevantId";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownRelevantId);
    EXPECT_NE(std::string(e.what()).find("zzz"), std::string::npos);
  }
}

TEST(RunEval, DeterministicApartFromTimings) {
  auto fx = food_fixture();
  LocalEmbedder emb(kFixtureDim);
  const auto chat = scripted_chat();
  const EvalOptions opts{{SearchMode::Raw, SearchMode::Assisted}, {5, 15}};
  const auto a = without_timings(to_json(run_eval(fx.corpus, fx.index, emb, &chat, fx.queries, {}, opts)));
  const auto b = without_timings(to_json(run_eval(fx.corpus, fx.index, emb, &chat, fx.queries, {}, opts)));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(RunEval, AggregatesRecomputeExactly) {
  auto fx = tourist_fixture();
  LocalEmbedder emb(kFixtureDim);
  const auto chat = scripted_chat();
  const auto report = run_eval(fx.corpus, fx.index, emb, &chat, fx.queries, {});
  ASSERT_EQ(report.aggregates.size(), 4u);
  for (const auto& agg : report.aggregates) {
    double sum = 0;
    std::size_t count = 0, degraded = 0;
    for (const auto& r : report.per_query) {
      if (r.mode != agg.mode || r.category != agg.category) continue;
      sum += r.precision;
      ++count;
      degraded += r.degraded;
    }
    EXPECT_EQ(agg.queries, count);
    EXPECT_EQ(agg.mean_precision, sum / static_cast<double>(count));
    EXPECT_EQ(agg.degraded, degraded);
  }
}

TEST(Report, JsonAndTable) {
  auto fx = tourist_fixture();
  LocalEmbedder emb(kFixtureDim);
  const auto chat = scripted_chat();
  const auto report = run_eval(fx.corpus, fx.index, emb, &chat, fx.queries, {}, {{SearchMode::Raw, SearchMode::Assisted}, {5, 15}});
  const auto j = to_json(report);
  EXPECT_EQ(j["top_n"], 3);
  EXPECT_EQ(j["per_query"].size(), report.per_query.size());
  EXPECT_EQ(j["k_sweep"].size(), 4u);
  const auto table = format_table(report);
  EXPECT_NE(table.find("P@3"), std::string::npos);
  EXPECT_NE(table.find("assisted"), std::string::npos);

  const auto plain = to_json(run_eval(fx.corpus, fx.index, emb, &chat, fx.queries, {}));
  EXPECT_FALSE(plain.contains("k_sweep"));
}
