#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rerank_search/http.hpp"

namespace rerank_search {

struct Candidate {
  std::string record_id;
  std::string document;
};

struct RerankRequest {
  std::string query;
  std::vector<Candidate> candidates;  // shortlist order
  std::size_t top_n = 3;
};

enum class DegradedReason { ParseFailure, TransportFailure, EmptySelection };

std::string_view to_string(DegradedReason reason);

struct RerankOutcome {
  std::vector<std::string> selected;
  bool degraded = false;
  std::optional<DegradedReason> degraded_reason;
};

struct Prompt {
  std::string system_text;
  std::string user_text;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the assistant's reply text. Failures are thrown as Error.
  virtual std::string complete(std::string_view system_text, std::string_view user_text) const = 0;
};

/// Throws InvalidArgument when the request breaks its invariants.
void validate(const RerankRequest& request);

Prompt build_prompt(const RerankRequest& request);

/// Total over arbitrary text: either a filtered id list or ParseFailure.
std::vector<std::string> parse_reply(std::string_view reply, const std::set<std::string, std::less<>>& valid_ids,
                                     std::size_t top_n);

/// Never throws for client failures; those degrade to shortlist order.
RerankOutcome rerank(const RerankRequest& request, const ChatClient& client);

inline constexpr std::string_view kDefaultChatModel = "gpt-4o";

/// POST {endpoint}/v1/chat/completions at temperature 0.
class OpenAiChatClient final : public ChatClient {
 public:
  OpenAiChatClient(std::string endpoint, std::string model, std::string api_key, RetryPolicy retry = {});

  std::string complete(std::string_view system_text, std::string_view user_text) const override;

  int retries() const noexcept { return client_.retries(); }

 private:
  std::string model_;
  mutable JsonHttpClient client_;
};

}  // namespace rerank_search
