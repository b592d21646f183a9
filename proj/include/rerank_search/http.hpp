#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace rerank_search {

inline constexpr std::string_view kApiKeyEnv = "RERANK_SEARCH_API_KEY";
inline constexpr std::string_view kEmbedUrlEnv = "RERANK_SEARCH_EMBED_URL";
inline constexpr std::string_view kChatUrlEnv = "RERANK_SEARCH_CHAT_URL";
inline constexpr std::string_view kDefaultApiBase = "https://api.openai.com";

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

/// POSTs JSON to an OpenAI-compatible server with bearer auth.
///
/// 429, 5xx and network failures are retried with exponential backoff up to
/// RetryPolicy::max_attempts. Once attempts run out the last failure surfaces
/// as RateLimited or TransportError. 401/403 map to AuthFailed at once.
/// At most four requests are in flight per client.
class JsonHttpClient {
 public:
  JsonHttpClient(std::string base_url, std::string api_key, std::chrono::seconds timeout,
                 RetryPolicy retry = {});

  nlohmann::json post(std::string_view path, const nlohmann::json& body);

  /// Number of retries performed over the client's lifetime.
  int retries() const noexcept { return retries_.load(); }
  const std::string& base_url() const noexcept { return base_url_; }

 private:
  std::string base_url_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string api_key_;
  std::chrono::seconds timeout_;
  RetryPolicy retry_;
  std::atomic<int> retries_{0};
  std::unique_ptr<std::counting_semaphore<4>> in_flight_;
};

/// Reads an environment variable; empty when unset.
std::string env_or_empty(std::string_view name);

}  // namespace rerank_search
