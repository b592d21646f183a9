#include "rerank_search/scripted_chat.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>

#include "rerank_search/embedder.hpp"
#include "rerank_search/error.hpp"

namespace rerank_search {
namespace {

constexpr std::array<std::string_view, 3> kNegationCues = {"no", "not", "without"};
constexpr std::array<std::string_view, 4> kConnectors = {"or", "and", "nor", "any"};
constexpr std::array<std::string_view, 4> kArticles = {"any", "a", "an", "the"};

template <std::size_t N>
bool one_of(std::string_view word, const std::array<std::string_view, N>& set) {
  return std::find(set.begin(), set.end(), word) != set.end();
}

struct ParsedPrompt {
  std::size_t top_n = 3;
  std::string query;
  std::vector<Candidate> candidates;
};

ParsedPrompt parse_prompt(std::string_view system_text, std::string_view user_text) {
  ParsedPrompt p;
  constexpr std::string_view marker = "select the ";
  if (const auto at = system_text.find(marker); at != std::string_view::npos) {
    const auto* first = system_text.data() + at + marker.size();
    std::from_chars(first, system_text.data() + system_text.size(), p.top_n);
  }

  constexpr std::string_view query_prefix = "Query: ";
  constexpr std::string_view list_marker = "\n\nCandidates:\n";
  const auto list_at = user_text.find(list_marker);
  if (!user_text.starts_with(query_prefix) || list_at == std::string_view::npos) {
    throw Error(ErrorCode::BadResponse, "scripted client cannot read this prompt");
  }
  p.query = std::string(user_text.substr(query_prefix.size(), list_at - query_prefix.size()));

  auto rest = user_text.substr(list_at + list_marker.size());
  while (!rest.empty()) {
    const auto eol = rest.find('\n');
    const auto line = rest.substr(0, eol);
    rest = eol == std::string_view::npos ? std::string_view{} : rest.substr(eol + 1);
    const auto sep = line.find(". ");
    if (sep == std::string_view::npos) continue;
    p.candidates.push_back({std::string(line.substr(0, sep)), std::string(line.substr(sep + 2))});
  }
  return p;
}

/// True when some token of `text` starts with the (single- or multi-word) term.
bool mentions(const std::vector<std::string>& tokens, std::string_view term) {
  const auto words = tokenize(term);
  if (words.empty()) return false;
  for (std::size_t i = 0; i + words.size() <= tokens.size(); ++i) {
    bool ok = true;
    for (std::size_t w = 0; w < words.size() && ok; ++w) {
      const bool last = w + 1 == words.size();
      ok = last ? tokens[i + w].starts_with(words[w]) : tokens[i + w] == words[w];
    }
    if (ok) return true;
  }
  return false;
}

std::map<std::string, std::vector<std::string>, std::less<>> term_map(const nlohmann::json& j, const char* key) {
  std::map<std::string, std::vector<std::string>, std::less<>> out;
  if (const auto it = j.find(key); it != j.end()) {
    for (const auto& [k, v] : it->items()) out[k] = v.get<std::vector<std::string>>();
  }
  return out;
}

}  // namespace

ScriptedChatClient::ScriptedChatClient(const nlohmann::json& fixture) {
  try {
    if (const auto it = fixture.find("replies"); it != fixture.end()) {
      for (const auto& [k, v] : it->items()) replies_[k] = v.get<std::string>();
    }
    synonyms_ = term_map(fixture, "synonyms");
    concepts_ = term_map(fixture, "concepts");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad scripted chat fixture: ") + e.what());
  }
}

ScriptedChatClient ScriptedChatClient::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open scripted chat fixture " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, "scripted chat fixture is not JSON: " + path.string());
  return ScriptedChatClient(j);
}

std::vector<std::string> ScriptedChatClient::excluded_terms(std::string_view query) const {
  const auto tokens = tokenize(query);
  std::vector<std::string> terms;
  auto add = [&](const std::string& term) {
    terms.push_back(term);
    if (const auto it = synonyms_.find(term); it != synonyms_.end()) {
      terms.insert(terms.end(), it->second.begin(), it->second.end());
    }
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!one_of(tokens[i], kNegationCues)) continue;
    std::size_t j = i + 1;
    while (j < tokens.size() && one_of(tokens[j], kArticles)) ++j;
    if (j >= tokens.size() || one_of(tokens[j], kNegationCues)) continue;
    add(tokens[j]);
    // "no fish or shrimp", "without pork and beef"
    while (j + 2 < tokens.size() && one_of(tokens[j + 1], kConnectors) && !one_of(tokens[j + 2], kNegationCues)) {
      j += 2;
      add(tokens[j]);
    }
    i = j;
  }
  return terms;
}

std::vector<std::string> ScriptedChatClient::boost_terms(std::string_view query) const {
  const auto tokens = tokenize(query);
  std::vector<std::string> terms;
  for (const auto& [concept_name, related] : concepts_) {
    if (!mentions(tokens, concept_name)) continue;
    terms.push_back(concept_name);
    terms.insert(terms.end(), related.begin(), related.end());
  }
  return terms;
}

std::string ScriptedChatClient::complete(std::string_view system_text, std::string_view user_text) const {
  const auto prompt = parse_prompt(system_text, user_text);
  if (const auto it = replies_.find(prompt.query); it != replies_.end()) return it->second;

  const auto excluded = excluded_terms(prompt.query);
  const auto boosted = boost_terms(prompt.query);

  std::vector<std::string> front;
  std::vector<std::string> back;
  for (const auto& c : prompt.candidates) {
    const auto doc_tokens = tokenize(c.document);
    const auto hit = [&](const std::string& t) { return mentions(doc_tokens, t); };
    if (std::any_of(excluded.begin(), excluded.end(), hit)) continue;
    (std::any_of(boosted.begin(), boosted.end(), hit) ? front : back).push_back(c.record_id);
  }
  front.insert(front.end(), back.begin(), back.end());
  if (front.size() > prompt.top_n) front.resize(prompt.top_n);
  return nlohmann::json(front).dump();
}

}  // namespace rerank_search
