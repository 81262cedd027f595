#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "finharness/common.hpp"
#include "finharness/prompts.hpp"

namespace finharness {

struct ChatMessage {
  std::string role;  // "system" or "user"
  std::string content;
};

struct CompletionRequest {
  std::string model_name;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 256;
  std::optional<std::vector<std::string>> stop;

  /// Throws InvalidRequestError.
  void validate() const;
};

CompletionRequest make_request(const RenderedPrompt& prompt, std::string model_name, double temperature = 0.0,
                               int max_tokens = 256);

/// Chat-completions request body: {model, messages, temperature, max_tokens[, stop]}.
nlohmann::json request_to_wire(const CompletionRequest& req);

/// SHA-256 over the canonical (key-sorted, compact) JSON of the fields that
/// determine the response: model, messages, temperature, max_tokens, stop.
std::string fingerprint(const CompletionRequest& req);

struct CompletionResult {
  std::string text;
  std::string request_fingerprint;
  bool from_cache = false;
  std::int64_t latency_ms = 0;
  int attempts = 0;  // network attempts; 0 when served from cache
};

struct RetryPolicy {
  int max_attempts = 3;
  std::int64_t base_backoff_ms = 250;
  double backoff_multiplier = 2.0;
  std::set<int> retryable_statuses{408, 429, 500, 502, 503, 504};

  void validate() const;
  /// Delay slept after the given failed attempt (1-based).
  std::chrono::milliseconds delay_after(int attempt) const;
};

class InvalidRequestError : public Error {
 public:
  using Error::Error;
};

/// Connection refused, reset, or timed out. Always retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

class EndpointUnreachableError : public Error {
 public:
  EndpointUnreachableError(int attempts, const std::string& last_failure)
      : Error("endpoint unreachable after " + std::to_string(attempts) + " attempt(s): " + last_failure),
        attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class NonRetryableStatusError : public Error {
 public:
  explicit NonRetryableStatusError(int status, const std::string& body = {})
      : Error("non-retryable HTTP status " + std::to_string(status) + (body.empty() ? "" : ": " + body.substr(0, 200))),
        status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class ResponseSchemaError : public Error {
 public:
  using Error::Error;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws TransportError when no HTTP response was received.
  virtual HttpResponse post_json(std::string_view path, const std::string& body) = 0;
};

/// cpp-httplib backed transport. `base_url` may carry a path prefix, e.g.
/// http://localhost:8000/api, which is prepended to every request path.
class HttpTransport final : public Transport {
 public:
  struct Options {
    std::string base_url;
    std::string bearer_token;
    std::chrono::seconds connect_timeout{10};
    std::chrono::seconds read_timeout{120};
  };

  explicit HttpTransport(Options options);
  HttpResponse post_json(std::string_view path, const std::string& body) override;

 private:
  Options options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// Empty string when the variable is unset.
std::string api_key_from_env(const std::string& variable);

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

/// POSTs `body`, retrying per `policy`. Returns the first 2xx response.
/// `attempts` (optional) receives the number of network attempts made.
HttpResponse post_with_retry(Transport& transport, std::string_view path, const std::string& body,
                             const RetryPolicy& policy, const Sleeper& sleep, int* attempts = nullptr);

/// Append-only JSON-lines store of {fingerprint, request, response, timestamp}.
/// Existing records are loaded on open; a torn trailing line from an
/// interrupted run is ignored. Thread-safe; writes go through one mutex.
class RecordCache {
 public:
  RecordCache() = default;  // in-memory only
  explicit RecordCache(const std::filesystem::path& path);

  std::optional<nlohmann::json> lookup(const std::string& fingerprint) const;
  void store(const std::string& fingerprint, const nlohmann::json& request, const nlohmann::json& response);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, nlohmann::json> entries_;
  std::ofstream out_;
};

struct ClientStats {
  std::size_t network_attempts = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
};

struct BatchOutcome {
  std::optional<CompletionResult> result;
  std::string error;
  bool ok() const noexcept { return result.has_value(); }
};

class ChatClient {
 public:
  static constexpr std::string_view kChatPath = "/v1/chat/completions";

  ChatClient(std::shared_ptr<Transport> transport, std::shared_ptr<RecordCache> cache,
             Sleeper sleeper = real_sleeper());

  /// Safe to call concurrently.
  CompletionResult complete(const CompletionRequest& req, const RetryPolicy& policy);

  /// Results are positionally aligned with `reqs`. At most `max_in_flight`
  /// requests are outstanding; per-request failures are embedded.
  std::vector<BatchOutcome> complete_batch(std::span<const CompletionRequest> reqs, const RetryPolicy& policy,
                                           std::size_t max_in_flight);

  ClientStats stats() const;

 private:
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<RecordCache> cache_;
  Sleeper sleeper_;
  std::atomic<std::size_t> network_attempts_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> cache_misses_{0};
};

/// First choice's message content from a chat-completions response body.
std::string extract_completion_text(const std::string& body);

}  // namespace finharness
