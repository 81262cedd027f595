#include "finharness/mock_server.hpp"

#include <algorithm>
#include <sstream>

#include <httplib.h>

#include "finharness/common.hpp"
#include "finharness/embedding.hpp"

namespace finharness {

using nlohmann::json;

namespace {

std::string last_user_message(const json& request) {
  std::string out;
  if (request.contains("messages") && request["messages"].is_array()) {
    for (const auto& m : request["messages"]) {
      if (m.is_object() && m.value("role", "") == "user" && m.contains("content") && m["content"].is_string()) {
        out = m["content"].get<std::string>();
      }
    }
  }
  return out;
}

std::size_t find_icase(std::string_view hay, std::string_view needle) {
  const auto h = to_lower_ascii(hay);
  const auto n = to_lower_ascii(needle);
  return h.find(n);
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string upper(std::string s) {
  for (auto& c : s) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return s;
}

}  // namespace

std::string mock_chat_reply(const json& request) {
  const std::string content = last_user_message(request);
  const std::uint64_t h = fnv1a64(content);

  constexpr std::string_view kChoiceHint = "one word from:";
  if (auto at = find_icase(content, kChoiceHint); at != std::string::npos) {
    std::string_view rest = std::string_view(content).substr(at + kChoiceHint.size());
    rest = rest.substr(0, std::min(rest.find('\n'), rest.size()));
    if (!rest.empty() && rest.back() == '.') rest.remove_suffix(1);
    std::vector<std::string> choices;
    std::stringstream ss{std::string(rest)};
    for (std::string item; std::getline(ss, item, ',');) {
      if (auto t = trim(item); !t.empty()) choices.emplace_back(t);
    }
    if (!choices.empty()) {
      const auto& pick = choices[h % choices.size()];
      switch ((h >> 8) % 3) {
        case 0: return "The answer is " + pick + ".";
        case 1: return "Based on the text, this sentence is best labeled as a " + pick + ".";
        default: return capitalize(pick);
      }
    }
  }

  if (find_icase(content, "buy, sell, or hold") != std::string::npos) {
    static const std::string actions[] = {"buy", "sell", "hold"};
    const auto& pick = actions[h % 3];
    switch ((h >> 8) % 3) {
      case 0: return "Decision: " + upper(pick) + ". The recent price action supports this view.";
      case 1: return "After weighing the news flow, I would " + pick + " today.";
      default: return capitalize(pick);
    }
  }

  std::string_view doc = content;
  if (auto at = find_icase(content, "document:"); at != std::string::npos) {
    doc = std::string_view(content).substr(at + 9);
    if (auto hint = doc.find("\n\n"); hint != std::string_view::npos) doc = doc.substr(0, hint);
  }
  std::istringstream words{std::string(doc)};
  std::string summary;
  int n = 0;
  for (std::string w; n < 20 && words >> w; ++n) {
    if (!summary.empty()) summary += ' ';
    summary += w;
  }
  return "Summary: " + summary;
}

std::vector<double> mock_embedding(const std::string& token, std::size_t dim) { return hashed_vector(token, dim); }

// ---------------------------------------------------------------------------

MockChatServer::MockChatServer() : MockChatServer(Options{}) {}

MockChatServer::MockChatServer(Options options) : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  const std::size_t workers = std::max<std::size_t>(options_.worker_threads, 1);
  server_->new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  install_routes();
}

MockChatServer::~MockChatServer() { stop(); }

void MockChatServer::install_routes() {
  auto track = [this](auto&& body) {
    const auto now = ++in_flight_;
    for (auto seen = max_in_flight_.load(); now > seen && !max_in_flight_.compare_exchange_weak(seen, now);) {
    }
    if (options_.latency.count() > 0) std::this_thread::sleep_for(options_.latency);
    body();
    --in_flight_;
  };

  server_->Post("/v1/chat/completions", [this, track](const httplib::Request& req, httplib::Response& res) {
    track([&] {
      ++chat_requests_;
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error&) {
        res.status = 400;
        res.set_content(R"({"error":"invalid json"})", "application/json");
        return;
      }
      const std::string user = last_user_message(body);
      {
        std::lock_guard lock(mu_);
        if (!scripted_.empty()) {
          res.status = scripted_.front();
          scripted_.pop_front();
          res.set_content(R"({"error":"scripted failure"})", "application/json");
          return;
        }
        if (!fail_needle_.empty() && user.find(fail_needle_) != std::string::npos) {
          res.status = fail_status_;
          res.set_content(R"({"error":"injected failure"})", "application/json");
          return;
        }
      }
      const std::string text = mock_chat_reply(body);
      json reply = {{"id", "mock-" + sha256_hex(req.body).substr(0, 16)},
                    {"object", "chat.completion"},
                    {"model", body.value("model", "mock")},
                    {"choices", json::array({{{"index", 0},
                                              {"message", {{"role", "assistant"}, {"content", text}}},
                                              {"finish_reason", "stop"}}})}};
      res.set_content(reply.dump(), "application/json");
    });
  });

  server_->Post("/v1/embeddings", [this, track](const httplib::Request& req, httplib::Response& res) {
    track([&] {
      ++embedding_requests_;
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error&) {
        res.status = 400;
        return;
      }
      if (!body.contains("input") || !body["input"].is_array()) {
        res.status = 400;
        return;
      }
      json data = json::array();
      std::size_t i = 0;
      for (const auto& tok : body["input"]) {
        data.push_back({{"index", i++}, {"embedding", mock_embedding(tok.get<std::string>(), options_.embedding_dim)}});
      }
      res.set_content(json{{"object", "list"}, {"data", data}}.dump(), "application/json");
    });
  });
}

void MockChatServer::start() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) throw IoError("mock server could not bind " + options_.host + ":" + std::to_string(options_.port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockChatServer::serve_forever() {
  if (thread_.joinable()) thread_.join();
}

void MockChatServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockChatServer::base_url() const { return "http://" + options_.host + ":" + std::to_string(port_); }

void MockChatServer::script_failures(std::deque<int> statuses) {
  std::lock_guard lock(mu_);
  scripted_ = std::move(statuses);
}

void MockChatServer::fail_when_contains(std::string needle, int status) {
  std::lock_guard lock(mu_);
  fail_needle_ = std::move(needle);
  fail_status_ = status;
}

void MockChatServer::reset_counters() {
  chat_requests_ = 0;
  embedding_requests_ = 0;
  max_in_flight_ = 0;
}

}  // namespace finharness
