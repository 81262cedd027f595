#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace finharness {

/// Deterministic reply for a chat-completions request body. The answer is a
/// pure function of the last user message:
///   - a "one word from: a, b" hint picks a choice by content hash;
///   - a "buy, sell, or hold" hint picks an action by content hash;
///   - otherwise the first words of the text after the last "Document:"
///     become a "Summary: ..." reply.
/// Replies are phrased verbosely so they exercise the parsers.
std::string mock_chat_reply(const nlohmann::json& request);

/// Hash-derived embedding, identical to the lookup provider's fallback.
std::vector<double> mock_embedding(const std::string& token, std::size_t dim);

/// In-process chat-completions + embeddings server for tests and offline runs.
class MockChatServer {
 public:
  struct Options {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 = any free port
    std::chrono::milliseconds latency{0};
    std::size_t embedding_dim = 32;
    std::size_t worker_threads = 16;
  };

  MockChatServer();
  explicit MockChatServer(Options options);
  ~MockChatServer();
  MockChatServer(const MockChatServer&) = delete;
  MockChatServer& operator=(const MockChatServer&) = delete;

  /// Binds and serves on a background thread. Throws on bind failure.
  void start();
  void stop();
  /// Blocks until stop() (for the standalone tool).
  void serve_forever();

  int port() const noexcept { return port_; }
  std::string base_url() const;

  /// The next chat requests are answered with these statuses, in order,
  /// before normal service resumes.
  void script_failures(std::deque<int> statuses);
  /// Every chat request whose user text contains `needle` gets `status`.
  void fail_when_contains(std::string needle, int status);

  std::size_t chat_requests() const noexcept { return chat_requests_.load(); }
  std::size_t embedding_requests() const noexcept { return embedding_requests_.load(); }
  std::size_t max_in_flight() const noexcept { return max_in_flight_.load(); }
  void reset_counters();

 private:
  void install_routes();

  Options options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;

  std::mutex mu_;
  std::deque<int> scripted_;
  std::string fail_needle_;
  int fail_status_ = 0;

  std::atomic<std::size_t> chat_requests_{0};
  std::atomic<std::size_t> embedding_requests_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
};

}  // namespace finharness
