#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "rerank_search/cli.hpp"
#include "stub_server.hpp"
#include "test_support.hpp"

using namespace rerank_search;
using namespace rerank_search::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rerank_search_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ::unsetenv("RERANK_SEARCH_API_KEY");
    ::unsetenv("RERANK_SEARCH_EMBED_URL");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string chat_flag() const { return "scripted:" + (data_dir() / "scripted_chat.json").string(); }

  std::string build_food() {
    const auto idx = path("food.idx");
    const auto r = cli({"build", "--csv", (data_dir() / "food.csv").string(), "--text-cols", "title,description",
                        "--provider", "local", "--dim", std::to_string(kFixtureDim), "--out", idx});
    EXPECT_EQ(r.code, 0) << r.err;
    return idx;
  }

  fs::path dir_;
};

bool has_seafood(const std::string& text) {
  return std::regex_search(text, std::regex("fish|shrimp|seafood", std::regex::icase));
}

}  // namespace

TEST_F(CliTest, BuildHappyPath) {
  const auto idx = path("food.idx");
  const auto r = cli({"build", "--csv", (data_dir() / "food.csv").string(), "--text-cols", "title,description", "--out", idx});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("48 records indexed"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("dim=256"), std::string::npos);
  EXPECT_TRUE(fs::exists(idx));
  EXPECT_TRUE(fs::exists(corpus_path_for(idx)));
}

TEST_F(CliTest, BuildMissingTextColsIsUsage) {
  const auto r = cli({"build", "--csv", (data_dir() / "food.csv").string(), "--out", path("x.idx")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--text-cols"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(CliTest, BuildRemoteWithoutKey) {
  const auto r = cli({"build", "--csv", (data_dir() / "food.csv").string(), "--text-cols", "title", "--provider",
                      "remote", "--out", path("x.idx")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("RERANK_SEARCH_API_KEY"), std::string::npos);
}

TEST_F(CliTest, BuildDataErrors) {
  EXPECT_EQ(cli({"build", "--csv", path("missing.csv"), "--text-cols", "title", "--out", path("x.idx")}).code, 2);
  const auto r = cli({"build", "--csv", (data_dir() / "food.csv").string(), "--text-cols", "flavour", "--out", path("x.idx")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("flavour"), std::string::npos);
}

TEST_F(CliTest, BuildRemoteAgainstStub) {
  StubServer stub;
  stub.server.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
    const auto input = nlohmann::json::parse(req.body)["input"];
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t i = 0; i < input.size(); ++i) {
      data.push_back({{"index", i}, {"embedding", {float(input[i].get<std::string>().size()), 1.0f, 2.0f}}});
    }
    res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
  });
  stub.start();
  ::setenv("RERANK_SEARCH_API_KEY", "test-key", 1);
  ::setenv("RERANK_SEARCH_EMBED_URL", stub.url().c_str(), 1);
  const auto idx = path("remote.idx");
  const auto r = cli({"build", "--csv", (data_dir() / "food.csv").string(), "--text-cols", "title,description",
                      "--provider", "remote", "--model", "stub-model", "--out", idx});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("model=stub-model"), std::string::npos);
  const auto info = cli({"inspect", "--index", idx});
  EXPECT_NE(info.out.find("dim=3"), std::string::npos);
}

TEST_F(CliTest, SearchAssistedAndRaw) {
  const auto idx = build_food();
  const std::string q = "food with no fish or shrimp";
  const auto assisted = cli({"search", "--index", idx, "--query", q, "--mode", "assisted", "--provider", chat_flag(), "--json"});
  ASSERT_EQ(assisted.code, 0) << assisted.err;
  const auto j = nlohmann::json::parse(assisted.out);
  ASSERT_EQ(j["results"].size(), 3u);
  for (const auto& row : j["results"]) EXPECT_FALSE(has_seafood(row["document"].get<std::string>())) << row["document"];
  EXPECT_EQ(j["degraded"], false);

  const auto raw = cli({"search", "--index", idx, "--query", q, "--mode", "raw", "--json"});
  ASSERT_EQ(raw.code, 0) << raw.err;
  bool any = false;
  const auto raw_json = nlohmann::json::parse(raw.out);
  for (const auto& row : raw_json["results"]) any |= has_seafood(row["document"].get<std::string>());
  EXPECT_TRUE(any);

  const auto text = cli({"search", "--index", idx, "--query", q, "--mode", "assisted", "--provider", chat_flag()});
  EXPECT_EQ(text.code, 0);
  EXPECT_NE(text.out.find("degraded: no"), std::string::npos);
  EXPECT_NE(text.out.find("rerank"), std::string::npos);
}

TEST_F(CliTest, SearchJsonMatchesLibrary) {
  const auto idx = build_food();
  const auto r = cli({"search", "--index", idx, "--query", "Japanese food", "--json"});
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  auto fx = food_fixture();
  LocalEmbedder emb(kFixtureDim);
  const auto expected = SearchPipeline(fx.index, fx.corpus, emb).raw_search("Japanese food", {}).ids();
  ASSERT_EQ(j["results"].size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(j["results"][i]["record_id"], expected[i]);
}

TEST_F(CliTest, SearchUsageErrors) {
  const auto idx = build_food();
  EXPECT_EQ(cli({"search", "--index", idx, "--query", "x", "--n", "0"}).code, 1);
  EXPECT_EQ(cli({"search", "--index", idx, "--query", "x", "--n", "5", "--k", "3"}).code, 1);
  EXPECT_EQ(cli({"search", "--index", idx, "--query", "x", "--bogus"}).code, 1);
  EXPECT_EQ(cli({"search", "--index", idx, "--query", "x", "--mode", "fancy"}).code, 1);
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(CliTest, SearchAssistedRemoteWithoutKey) {
  const auto idx = build_food();
  const auto r = cli({"search", "--index", idx, "--query", "sushi", "--mode", "assisted"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("RERANK_SEARCH_API_KEY"), std::string::npos);
}

TEST_F(CliTest, EvalWithSweep) {
  const auto idx = build_food();
  const auto report = path("report.json");
  const auto r = cli({"eval", "--index", idx, "--queries", (data_dir() / "food_qrels.json").string(), "--provider",
                      chat_flag(), "--k-sweep", "5,15", "--out", report});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("P@3"), std::string::npos);
  std::ifstream f(report);
  const auto j = nlohmann::json::parse(f);
  std::set<std::size_t> ks;
  for (const auto& p : j["k_sweep"]) ks.insert(p["k"].get<std::size_t>());
  EXPECT_EQ(ks, (std::set<std::size_t>{5, 15}));
  EXPECT_EQ(j["k_sweep"].size(), 4u);
}

TEST_F(CliTest, EvalWithCsvOverride) {
  const auto idx = build_food();
  const auto r = cli({"eval", "--index", idx, "--csv", (data_dir() / "food.csv").string(), "--text-cols",
                      "title,description", "--queries", (data_dir() / "food_qrels.json").string(), "--mode", "raw"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, EvalUnknownRelevantId) {
  const auto idx = build_food();
  const auto qrels = path("bad_qrels.json");
  std::ofstream(qrels) << R"([{"query_id":"q","text":"sushi","category":"simple","relevant_ids":["zzz"]}])";
  const auto r = cli({"eval", "--index", idx, "--queries", qrels, "--mode", "raw"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("zzz"), std::string::npos);
}

TEST_F(CliTest, InspectReportsHeader) {
  const auto idx = build_food();
  const auto r = cli({"inspect", "--index", idx});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "VSIX v1, cosine, dim=2353, n=48, model=local-fnv2353, crc ok\n");
}

TEST_F(CliTest, InspectTruncatedAndWrongMagic) {
  const auto idx = build_food();
  const auto size = fs::file_size(idx);
  const auto truncated = path("truncated.idx");
  fs::copy_file(idx, truncated);
  fs::resize_file(truncated, size - 100);
  auto r = cli({"inspect", "--index", truncated});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("corrupt payload"), std::string::npos) << r.err;

  const auto bad = path("bad.idx");
  std::ofstream(bad, std::ios::binary) << "NOPE and some more bytes";
  r = cli({"inspect", "--index", bad});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad magic"), std::string::npos) << r.err;

  EXPECT_EQ(cli({"search", "--index", bad, "--query", "x"}).code, 2);
}
