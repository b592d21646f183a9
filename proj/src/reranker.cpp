#include "rerank_search/reranker.hpp"

#include <algorithm>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "rerank_search/error.hpp"

namespace rerank_search {
namespace {

std::string single_line(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r' || text[i] == '\n') {
      if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      out += ' ';
    } else {
      out += text[i];
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::string_view strip_fence(std::string_view s) {
  if (!s.starts_with("```")) return s;
  const auto eol = s.find('\n');
  if (eol == std::string_view::npos) {
    // ```[...]``` on one line
    s.remove_prefix(3);
  } else {
    s.remove_prefix(eol + 1);
  }
  if (s.ends_with("```")) s.remove_suffix(3);
  return trim(s);
}

}  // namespace

std::string_view to_string(DegradedReason reason) {
  switch (reason) {
    case DegradedReason::ParseFailure: return "parse_failure";
    case DegradedReason::TransportFailure: return "transport_failure";
    case DegradedReason::EmptySelection: return "empty_selection";
  }
  return "unknown";
}

void validate(const RerankRequest& request) {
  if (request.top_n == 0) throw Error(ErrorCode::InvalidArgument, "top_n must be at least 1");
  if (request.candidates.empty()) throw Error(ErrorCode::InvalidArgument, "rerank needs at least one candidate");
  std::unordered_set<std::string_view> ids;
  for (const auto& c : request.candidates) {
    if (!ids.insert(c.record_id).second) {
      throw Error(ErrorCode::InvalidArgument, "candidate id '" + c.record_id + "' appears twice");
    }
  }
}

Prompt build_prompt(const RerankRequest& request) {
  const auto n = std::to_string(request.top_n);
  const std::string noun = request.top_n == 1 ? "item" : "items";

  Prompt p;
  p.system_text = "You are a search-result ranker. Given a user query and a list of candidate items, select the " + n +
                  " " + noun +
                  " most relevant to the query and rank them, most relevant first. Respect negations, constraints, "
                  "and conceptual requirements in the query. Reply with ONLY a JSON array of the selected item ids. "
                  "Select fewer than " +
                  n + " only if fewer are relevant.";

  p.user_text = "Query: " + single_line(request.query) + "\n\nCandidates:\n";
  for (const auto& c : request.candidates) {
    p.user_text += c.record_id;
    p.user_text += ". ";
    p.user_text += single_line(c.document);
    p.user_text += '\n';
  }
  return p;
}

std::vector<std::string> parse_reply(std::string_view reply, const std::set<std::string, std::less<>>& valid_ids,
                                     std::size_t top_n) {
  const auto body = strip_fence(trim(reply));
  const auto j = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded() || !j.is_array()) throw Error(ErrorCode::ParseFailure, "reply is not a JSON array");
  if (!std::all_of(j.begin(), j.end(), [](const auto& v) { return v.is_string(); })) {
    throw Error(ErrorCode::ParseFailure, "reply array holds non-string elements");
  }

  std::vector<std::string> out;
  for (const auto& v : j) {
    if (out.size() >= top_n) break;
    const auto& id = v.template get_ref<const std::string&>();
    if (!valid_ids.contains(id)) continue;
    if (std::find(out.begin(), out.end(), id) != out.end()) continue;
    out.push_back(id);
  }
  return out;
}

RerankOutcome rerank(const RerankRequest& request, const ChatClient& client) {
  validate(request);

  auto fallback = [&](DegradedReason reason) {
    RerankOutcome o;
    const auto n = std::min(request.top_n, request.candidates.size());
    for (std::size_t i = 0; i < n; ++i) o.selected.push_back(request.candidates[i].record_id);
    o.degraded = true;
    o.degraded_reason = reason;
    return o;
  };

  const auto prompt = build_prompt(request);
  std::string reply;
  try {
    reply = client.complete(prompt.system_text, prompt.user_text);
  } catch (const std::exception&) {
    return fallback(DegradedReason::TransportFailure);
  }

  std::set<std::string, std::less<>> valid;
  for (const auto& c : request.candidates) valid.insert(c.record_id);

  RerankOutcome outcome;
  try {
    outcome.selected = parse_reply(reply, valid, request.top_n);
  } catch (const Error&) {
    return fallback(DegradedReason::ParseFailure);
  }
  if (outcome.selected.empty()) {
    outcome.degraded = true;
    outcome.degraded_reason = DegradedReason::EmptySelection;
  }
  return outcome;
}

OpenAiChatClient::OpenAiChatClient(std::string endpoint, std::string model, std::string api_key, RetryPolicy retry)
    : model_(std::move(model)), client_(std::move(endpoint), std::move(api_key), std::chrono::seconds(60), retry) {}

std::string OpenAiChatClient::complete(std::string_view system_text, std::string_view user_text) const {
  const nlohmann::json body = {
      {"model", model_},
      {"temperature", 0},
      {"messages",
       {{{"role", "system"}, {"content", system_text}}, {{"role", "user"}, {"content", user_text}}}},
  };
  const auto reply = client_.post("/v1/chat/completions", body);
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw Error(ErrorCode::BadResponse, "message content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadResponse, std::string("chat reply missing choices[0].message.content: ") + e.what());
  }
}

}  // namespace rerank_search
