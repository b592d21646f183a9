#include "rerank_search/http.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "rerank_search/error.hpp"

namespace rerank_search {
namespace {

struct SemaphoreGuard {
  explicit SemaphoreGuard(std::counting_semaphore<4>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;
  std::counting_semaphore<4>& sem;
};

}  // namespace

JsonHttpClient::JsonHttpClient(std::string base_url, std::string api_key, std::chrono::seconds timeout,
                               RetryPolicy retry)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      timeout_(timeout),
      retry_(retry),
      in_flight_(std::make_unique<std::counting_semaphore<4>>(4)) {
  while (base_url_.ends_with('/')) base_url_.pop_back();
  const auto scheme_end = base_url_.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidArgument, "endpoint URL needs a scheme: " + base_url_);
  const auto path_start = base_url_.find('/', scheme_end + 3);
  scheme_host_port_ = base_url_.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : base_url_.substr(path_start);
  if (retry_.max_attempts < 1) retry_.max_attempts = 1;
}

nlohmann::json JsonHttpClient::post(std::string_view path, const nlohmann::json& body) {
  const std::string payload = body.dump();
  const std::string target = path_prefix_ + std::string(path);
  auto backoff = retry_.initial_backoff;

  for (int attempt = 1;; ++attempt) {
    ErrorCode failure;
    std::string detail;
    {
      SemaphoreGuard guard(*in_flight_);
      httplib::Client client(scheme_host_port_);
      client.set_connection_timeout(timeout_);
      client.set_read_timeout(timeout_);
      client.set_write_timeout(timeout_);
      httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
      const auto res = client.Post(target, headers, payload, "application/json");

      if (!res) {
        failure = ErrorCode::TransportError;
        detail = "POST " + base_url_ + std::string(path) + ": " + httplib::to_string(res.error());
      } else if (res->status == 401 || res->status == 403) {
        throw Error(ErrorCode::AuthFailed, "server returned HTTP " + std::to_string(res->status));
      } else if (res->status == 429) {
        failure = ErrorCode::RateLimited;
        detail = "server returned HTTP 429 after " + std::to_string(attempt) + " attempt(s)";
      } else if (res->status >= 500) {
        failure = ErrorCode::TransportError;
        detail = "server returned HTTP " + std::to_string(res->status);
      } else if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::BadResponse, "server returned HTTP " + std::to_string(res->status) + ": " + res->body);
      } else {
        auto parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) throw Error(ErrorCode::BadResponse, "response body is not JSON");
        return parsed;
      }
    }

    if (attempt >= retry_.max_attempts) throw Error(failure, detail);
    ++retries_;
    std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * retry_.multiplier));
  }
}

std::string env_or_empty(std::string_view name) {
  const char* value = std::getenv(std::string(name).c_str());
  return value ? value : "";
}

}  // namespace rerank_search
