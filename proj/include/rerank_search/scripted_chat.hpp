#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rerank_search/reranker.hpp"

namespace rerank_search {

/// Deterministic offline stand-in for a chat model, driven by a JSON fixture:
///
///   {
///     "replies":  {"<exact query>": "<reply text>", ...},
///     "synonyms": {"fish": ["seafood", "salmon", ...], ...},
///     "concepts": {"wildlife": ["panda", "zoo", ...], ...}
///   }
///
/// A query listed under "replies" gets that reply verbatim. Otherwise the
/// client reads the ranking prompt and answers like a careful ranker would:
/// terms after "no", "not" or "without" (chained with "or"/"and"/"nor"), plus
/// their synonyms, knock out any candidate whose document has a word starting
/// with one of them. Query words naming a concept move candidates mentioning
/// the concept or its terms to the front. Ties keep shortlist order.
class ScriptedChatClient final : public ChatClient {
 public:
  ScriptedChatClient() = default;
  explicit ScriptedChatClient(const nlohmann::json& fixture);
  static ScriptedChatClient from_file(const std::filesystem::path& path);

  std::string complete(std::string_view system_text, std::string_view user_text) const override;

  /// Words the rules would exclude for `query` (negated terms and synonyms).
  std::vector<std::string> excluded_terms(std::string_view query) const;
  std::vector<std::string> boost_terms(std::string_view query) const;

 private:
  std::map<std::string, std::string, std::less<>> replies_;
  std::map<std::string, std::vector<std::string>, std::less<>> synonyms_;
  std::map<std::string, std::vector<std::string>, std::less<>> concepts_;
};

}  // namespace rerank_search
