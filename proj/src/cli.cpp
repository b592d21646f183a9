#include "rerank_search/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rerank_search/embedder.hpp"
#include "rerank_search/error.hpp"
#include "rerank_search/eval.hpp"
#include "rerank_search/index.hpp"
#include "rerank_search/ingest.hpp"
#include "rerank_search/pipeline.hpp"
#include "rerank_search/remote_embedder.hpp"
#include "rerank_search/reranker.hpp"
#include "rerank_search/scripted_chat.hpp"

namespace rerank_search {
namespace {

constexpr std::string_view kScriptedPrefix = "scripted:";

std::string require_api_key() {
  auto key = env_or_empty(kApiKeyEnv);
  if (key.empty()) {
    throw Error(ErrorCode::AuthFailed, "environment variable " + std::string(kApiKeyEnv) + " is not set");
  }
  return key;
}

std::string endpoint_from_env(std::string_view var) {
  auto url = env_or_empty(var);
  return url.empty() ? std::string(kDefaultApiBase) : url;
}

/// Query-side provider matching the model an index was built with.
std::unique_ptr<EmbeddingProvider> provider_for(const FlatIndex& index) {
  if (const auto dim = parse_local_model_id(index.model_id())) return std::make_unique<LocalEmbedder>(*dim);
  return std::make_unique<RemoteEmbedder>(endpoint_from_env(kEmbedUrlEnv), index.model_id(), require_api_key());
}

std::unique_ptr<ChatClient> chat_client_for(const std::string& choice, const std::string& model) {
  if (choice.starts_with(kScriptedPrefix)) {
    return std::make_unique<ScriptedChatClient>(ScriptedChatClient::from_file(choice.substr(kScriptedPrefix.size())));
  }
  if (choice != "remote") {
    throw Error(ErrorCode::InvalidArgument, "--provider must be 'remote' or 'scripted:<fixture.json>'");
  }
  return std::make_unique<OpenAiChatClient>(endpoint_from_env(kChatUrlEnv), model, require_api_key());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

CorpusSchema schema_from(const std::string& id_col, const std::string& text_cols) {
  CorpusSchema schema;
  if (!id_col.empty()) schema.id_column = id_col;
  schema.text_columns = split_list(text_cols);
  if (schema.text_columns.empty()) throw Error(ErrorCode::InvalidArgument, "--text-cols names no columns");
  return schema;
}

struct BuildArgs {
  std::string csv, id_col, text_cols, provider = "local", model = std::string(kDefaultEmbedModel), metric = "cosine", out;
  std::size_t dim = kDefaultLocalDim;
};

struct SearchArgs {
  std::string index, query, mode = "raw", provider = "remote", chat_model = std::string(kDefaultChatModel);
  std::size_t k = 15, n = 3;
  bool json = false, pad = false;
};

struct EvalArgs {
  std::string index, csv, id_col, text_cols, queries, mode = "both", k_sweep, out, provider = "remote",
      chat_model = std::string(kDefaultChatModel);
  std::size_t k = 15, n = 3;
};

int cmd_build(const BuildArgs& a, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const auto metric = parse_metric(a.metric);
  Corpus corpus(load_csv(a.csv, schema_from(a.id_col, a.text_cols)), schema_from(a.id_col, a.text_cols));

  std::unique_ptr<EmbeddingProvider> provider;
  if (a.provider == "local") {
    provider = std::make_unique<LocalEmbedder>(a.dim);
  } else if (a.provider == "remote") {
    provider = std::make_unique<RemoteEmbedder>(endpoint_from_env(kEmbedUrlEnv), a.model, require_api_key());
  } else {
    throw Error(ErrorCode::InvalidArgument, "--provider must be 'local' or 'remote'");
  }

  std::vector<std::string> docs;
  docs.reserve(corpus.size());
  for (const auto& r : corpus.records()) docs.push_back(r.document());
  auto vectors = provider->embed_batch(docs);

  std::vector<std::pair<std::string, EmbeddingVector>> pairs;
  pairs.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) pairs.emplace_back(corpus.records()[i].id(), std::move(vectors[i]));
  const auto index = FlatIndex::build(std::move(pairs), metric);

  save_corpus(corpus, corpus_path_for(a.out));
  save_index(index, a.out);

  const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  out << index.size() << " records indexed (dim=" << index.dim() << ", metric=" << to_string(index.metric())
      << ", model=" << index.model_id() << ") in " << std::fixed << std::setprecision(1) << elapsed << " ms\n";
  return kExitOk;
}

void print_result(const SearchResult& r, std::ostream& out) {
  out << "mode: " << to_string(r.mode);
  if (r.mode == SearchMode::Assisted) {
    out << "  degraded: " << (r.degraded ? "yes" : "no");
    if (r.degraded_reason) out << " (" << to_string(*r.degraded_reason) << ")";
  }
  out << '\n';
  for (const auto& row : r.results) {
    out << std::setw(4) << row.rank << "  " << std::left << std::setw(10) << row.record_id << std::right << "  ";
    if (row.stage1_score) {
      out << std::fixed << std::setprecision(4) << std::setw(8) << *row.stage1_score;
    } else {
      out << std::setw(8) << "-";
    }
    out << "  " << row.document << '\n';
  }
  out << std::fixed << std::setprecision(3) << "timings: embed " << r.timings.embed_ms << " ms, search "
      << r.timings.search_ms << " ms";
  if (r.timings.rerank_ms) out << ", rerank " << *r.timings.rerank_ms << " ms";
  out << '\n';
}

int cmd_search(const SearchArgs& a, std::ostream& out) {
  PipelineConfig config{a.k, a.n, parse_mode(a.mode), a.pad};
  validate(config);
  const auto index = load_index(a.index);
  const auto corpus = load_corpus(corpus_path_for(a.index));
  auto provider = provider_for(index);
  std::unique_ptr<ChatClient> chat;
  if (config.mode == SearchMode::Assisted) chat = chat_client_for(a.provider, a.chat_model);

  const SearchPipeline pipeline(index, corpus, *provider, chat.get());
  const auto result = pipeline.run(a.query, config);
  if (a.json) {
    out << to_json(result).dump(2) << '\n';
  } else {
    print_result(result, out);
  }
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  PipelineConfig config{a.k, a.n, SearchMode::Assisted, false};
  validate(config);

  EvalOptions options;
  if (a.mode == "raw") {
    options.modes = {SearchMode::Raw};
  } else if (a.mode == "assisted") {
    options.modes = {SearchMode::Assisted};
  } else if (a.mode != "both") {
    throw Error(ErrorCode::InvalidArgument, "--mode must be raw, assisted or both");
  }
  for (const auto& k : split_list(a.k_sweep)) {
    std::size_t v = 0;
    try {
      v = std::stoul(k);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "--k-sweep value '" + k + "' is not a number");
    }
    if (v == 0) throw Error(ErrorCode::InvalidArgument, "--k-sweep values must be positive");
    options.k_values.push_back(v);
  }

  const auto index = load_index(a.index);
  auto sidecar = load_corpus(corpus_path_for(a.index));
  std::optional<Corpus> from_csv;
  if (!a.csv.empty()) {
    const auto schema = a.text_cols.empty() ? sidecar.schema() : schema_from(a.id_col, a.text_cols);
    from_csv.emplace(load_csv(a.csv, schema), schema);
    if (from_csv->size() != index.size()) {
      throw Error(ErrorCode::UnknownRelevantId, "CSV has " + std::to_string(from_csv->size()) + " rows but the index has " +
                                              std::to_string(index.size()));
    }
    for (const auto& e : index.entries()) {
      if (!from_csv->find(e.record_id)) throw Error(ErrorCode::UnknownRelevantId, "index id '" + e.record_id + "' not in CSV");
    }
  }
  const Corpus& corpus = from_csv ? *from_csv : sidecar;

  const auto queries = load_queries(a.queries);
  auto provider = provider_for(index);
  std::unique_ptr<ChatClient> chat;
  if (std::find(options.modes.begin(), options.modes.end(), SearchMode::Assisted) != options.modes.end()) {
    chat = chat_client_for(a.provider, a.chat_model);
  }

  const auto report = run_eval(corpus, index, *provider, chat.get(), queries, config, options);
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + a.out);
    f << to_json(report).dump(2) << '\n';
  }
  out << format_table(report);
  return kExitOk;
}

int cmd_inspect(const std::string& path, std::ostream& out, std::ostream& err) {
  const auto info = inspect_index(path);
  out << "VSIX v" << static_cast<int>(info.version) << ", " << to_string(info.metric) << ", dim=" << info.dim
      << ", n=" << info.count << ", model=" << info.model_id << ", crc " << (info.crc_ok ? "ok" : "FAILED") << '\n';
  if (!info.crc_ok) {
    err << "error: corrupt payload\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

std::string corpus_path_for(const std::string& index_path) { return index_path + ".corpus.json"; }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage semantic search: exact vector shortlist, then LLM reranking", "rerank-search"};
  app.require_subcommand(1);

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Ingest a CSV, embed every row and write an index");
  b->add_option("--csv", build.csv, "Input CSV with a header row")->required();
  b->add_option("--id-col", build.id_col, "Column holding record ids (default: row ordinals r0001...)");
  b->add_option("--text-cols", build.text_cols, "Comma-separated columns composed into the document")->required();
  b->add_option("--provider", build.provider, "Embedding provider")->check(CLI::IsMember({"local", "remote"}));
  b->add_option("--dim", build.dim, "Local embedder dimension")->check(CLI::PositiveNumber);
  b->add_option("--model", build.model, "Remote embedding model");
  b->add_option("--metric", build.metric, "Similarity metric")->check(CLI::IsMember({"cosine", "dot", "l2"}));
  b->add_option("--out", build.out, "Index file to write")->required();

  SearchArgs search;
  auto* s = app.add_subcommand("search", "Query an index in raw or assisted mode");
  s->add_option("--index", search.index, "Index file")->required();
  s->add_option("--query", search.query, "Query text")->required();
  s->add_option("--mode", search.mode, "raw or assisted")->check(CLI::IsMember({"raw", "assisted"}));
  s->add_option("--k", search.k, "Shortlist size for assisted mode")->check(CLI::PositiveNumber);
  s->add_option("--n", search.n, "Number of results")->check(CLI::PositiveNumber);
  s->add_flag("--json", search.json, "Print the result as JSON");
  s->add_flag("--pad", search.pad, "Refill short LLM selections from vector order");
  s->add_option("--provider", search.provider, "Chat provider: remote or scripted:<fixture.json>");
  s->add_option("--chat-model", search.chat_model, "Remote chat model");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compare raw and assisted search over judged queries");
  e->add_option("--index", ev.index, "Index file")->required();
  e->add_option("--csv", ev.csv, "Corpus CSV (default: the corpus stored with the index)");
  e->add_option("--id-col", ev.id_col, "Id column when --csv is given");
  e->add_option("--text-cols", ev.text_cols, "Text columns when --csv is given");
  e->add_option("--queries", ev.queries, "Judged queries JSON")->required();
  e->add_option("--mode", ev.mode, "raw, assisted or both")->check(CLI::IsMember({"raw", "assisted", "both"}));
  e->add_option("--k", ev.k, "Shortlist size")->check(CLI::PositiveNumber);
  e->add_option("--n", ev.n, "Results per query")->check(CLI::PositiveNumber);
  e->add_option("--k-sweep", ev.k_sweep, "Comma-separated shortlist sizes to sweep");
  e->add_option("--out", ev.out, "Report JSON to write");
  e->add_option("--provider", ev.provider, "Chat provider: remote or scripted:<fixture.json>");
  e->add_option("--chat-model", ev.chat_model, "Remote chat model");

  std::string inspect_path;
  auto* in = app.add_subcommand("inspect", "Print an index file's header and checksum status");
  in->add_option("--index", inspect_path, "Index file")->required();

  std::vector<const char*> argv{"rerank-search"};
  for (const auto& arg : args) argv.push_back(arg.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  try {
    if (*b) return cmd_build(build, out);
    if (*s) return cmd_search(search, out);
    if (*e) return cmd_eval(ev, out);
    return cmd_inspect(inspect_path, out, err);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    switch (category(ex.code())) {
      case ErrorCategory::Usage: return kExitUsage;
      case ErrorCategory::Provider: return kExitProvider;
      case ErrorCategory::Data: return kExitData;
    }
    return kExitData;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  }
}

}  // namespace rerank_search
