#include "finharness/llm_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace finharness {

using nlohmann::json;

void CompletionRequest::validate() const {
  if (model_name.empty()) throw InvalidRequestError("model_name is empty");
  if (messages.empty()) throw InvalidRequestError("messages is empty");
  for (const auto& m : messages) {
    if (m.role != "system" && m.role != "user") throw InvalidRequestError("unsupported role '" + m.role + "'");
  }
  for (std::size_t i = 1; i < messages.size(); ++i) {
    if (messages[i].role == "system") throw InvalidRequestError("system message must come first");
  }
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw InvalidRequestError("temperature must be >= 0");
  if (max_tokens <= 0) throw InvalidRequestError("max_tokens must be positive");
}

CompletionRequest make_request(const RenderedPrompt& prompt, std::string model_name, double temperature,
                               int max_tokens) {
  CompletionRequest req;
  req.model_name = std::move(model_name);
  if (!prompt.system_text.empty()) req.messages.push_back({"system", prompt.system_text});
  req.messages.push_back({"user", prompt.user_text});
  req.temperature = temperature;
  req.max_tokens = max_tokens;
  return req;
}

namespace {

json messages_json(const CompletionRequest& req) {
  json msgs = json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return msgs;
}

}  // namespace

json request_to_wire(const CompletionRequest& req) {
  json body = {{"model", req.model_name},
               {"messages", messages_json(req)},
               {"temperature", req.temperature},
               {"max_tokens", req.max_tokens}};
  if (req.stop) body["stop"] = *req.stop;
  return body;
}

std::string fingerprint(const CompletionRequest& req) {
  // nlohmann::json objects are key-sorted, so dump() is canonical.
  json canon = {{"model", req.model_name},
                {"messages", messages_json(req)},
                {"temperature", req.temperature},
                {"max_tokens", req.max_tokens},
                {"stop", req.stop ? json(*req.stop) : json(nullptr)}};
  return sha256_hex(canon.dump());
}

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw InvalidRequestError("max_attempts must be >= 1");
  if (base_backoff_ms < 0) throw InvalidRequestError("base_backoff_ms must be >= 0");
  if (!(backoff_multiplier >= 1.0)) throw InvalidRequestError("backoff_multiplier must be >= 1");
}

std::chrono::milliseconds RetryPolicy::delay_after(int attempt) const {
  const double ms = static_cast<double>(base_backoff_ms) * std::pow(backoff_multiplier, std::max(0, attempt - 1));
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::min(ms, 600000.0)));
}

// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(Options options) : options_(std::move(options)) {
  const auto& url = options_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidRequestError("base URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

HttpResponse HttpTransport::post_json(std::string_view path, const std::string& body) {
  httplib::Client cli(scheme_host_port_);
  cli.set_connection_timeout(options_.connect_timeout);
  cli.set_read_timeout(options_.read_timeout);
  if (!options_.bearer_token.empty()) cli.set_bearer_token_auth(options_.bearer_token);
  const std::string full_path = path_prefix_ + std::string(path);
  auto res = cli.Post(full_path, body, "application/json");
  if (!res) throw TransportError(httplib::to_string(res.error()) + " (" + scheme_host_port_ + full_path + ")");
  return {res->status, res->body};
}

std::string api_key_from_env(const std::string& variable) {
  if (variable.empty()) return {};
  const char* v = std::getenv(variable.c_str());
  return v ? std::string(v) : std::string{};
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) {
    if (d.count() > 0) std::this_thread::sleep_for(d);
  };
}

HttpResponse post_with_retry(Transport& transport, std::string_view path, const std::string& body,
                             const RetryPolicy& policy, const Sleeper& sleep, int* attempts) {
  policy.validate();
  std::string last_failure;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    if (attempts) *attempts = attempt;
    try {
      HttpResponse res = transport.post_json(path, body);
      if (res.status >= 200 && res.status < 300) return res;
      if (!policy.retryable_statuses.contains(res.status)) throw NonRetryableStatusError(res.status, res.body);
      last_failure = "HTTP " + std::to_string(res.status);
    } catch (const TransportError& e) {
      last_failure = e.what();
    }
    if (attempt < policy.max_attempts) sleep(policy.delay_after(attempt));
  }
  throw EndpointUnreachableError(policy.max_attempts, last_failure);
}

// ---------------------------------------------------------------------------

RecordCache::RecordCache(const std::filesystem::path& path) {
  if (std::filesystem::exists(path)) {
    const std::string text = read_file(path);
    for (auto line : split_lines(text)) {
      if (trim(line).empty()) continue;
      try {
        json rec = json::parse(line);
        if (rec.is_object() && rec.contains("fingerprint") && rec["fingerprint"].is_string() && rec.contains("response")) {
          entries_.insert_or_assign(rec["fingerprint"].get<std::string>(), rec["response"]);
        }
      } catch (const json::parse_error&) {
        // torn write from an interrupted run
      }
    }
    // A torn final line has no newline; start appends on a fresh line.
    if (!text.empty() && text.back() != '\n') {
      std::ofstream fix(path, std::ios::binary | std::ios::app);
      fix << '\n';
    }
  } else if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw IoError("cannot open cache file " + path.string());
}

std::optional<json> RecordCache::lookup(const std::string& fp) const {
  std::lock_guard lock(mu_);
  if (auto it = entries_.find(fp); it != entries_.end()) return it->second;
  return std::nullopt;
}

void RecordCache::store(const std::string& fp, const json& request, const json& response) {
  std::lock_guard lock(mu_);
  entries_.insert_or_assign(fp, response);
  if (out_.is_open()) {
    json rec = {{"fingerprint", fp}, {"request", request}, {"response", response}, {"timestamp", utc_timestamp()}};
    out_ << rec.dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("cache append failed");
  }
}

std::size_t RecordCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------

std::string extract_completion_text(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ResponseSchemaError(std::string("response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw ResponseSchemaError("response has no choices");
  }
  const auto& first = doc["choices"][0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
    throw ResponseSchemaError("first choice has no message");
  }
  const auto& content = first["message"].value("content", json(nullptr));
  if (!content.is_string()) throw ResponseSchemaError("message content is not a string");
  return content.get<std::string>();
}

ChatClient::ChatClient(std::shared_ptr<Transport> transport, std::shared_ptr<RecordCache> cache, Sleeper sleeper)
    : transport_(std::move(transport)), cache_(std::move(cache)), sleeper_(std::move(sleeper)) {
  if (!cache_) cache_ = std::make_shared<RecordCache>();
}

CompletionResult ChatClient::complete(const CompletionRequest& req, const RetryPolicy& policy) {
  req.validate();
  CompletionResult result;
  result.request_fingerprint = fingerprint(req);

  if (auto hit = cache_->lookup(result.request_fingerprint); hit && hit->is_string()) {
    ++cache_hits_;
    result.text = hit->get<std::string>();
    result.from_cache = true;
    return result;
  }
  ++cache_misses_;
  if (!transport_) throw EndpointUnreachableError(0, "no endpoint configured and response not cached");

  const json wire = request_to_wire(req);
  const auto start = std::chrono::steady_clock::now();
  int attempts = 0;
  HttpResponse res;
  try {
    res = post_with_retry(*transport_, kChatPath, wire.dump(), policy, sleeper_, &attempts);
  } catch (...) {
    network_attempts_ += static_cast<std::size_t>(attempts);
    throw;
  }
  network_attempts_ += static_cast<std::size_t>(attempts);
  result.text = extract_completion_text(res.body);
  result.attempts = attempts;
  result.latency_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  cache_->store(result.request_fingerprint, wire, result.text);
  return result;
}

std::vector<BatchOutcome> ChatClient::complete_batch(std::span<const CompletionRequest> reqs,
                                                     const RetryPolicy& policy, std::size_t max_in_flight) {
  if (max_in_flight < 1) throw InvalidRequestError("max_in_flight must be >= 1");
  std::vector<BatchOutcome> out(reqs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < reqs.size(); i = next++) {
      try {
        out[i].result = complete(reqs[i], policy);
      } catch (const std::exception& e) {
        out[i].error = e.what();
      }
    }
  };

  const std::size_t n_workers = std::min(max_in_flight, reqs.size());
  if (n_workers <= 1) {
    worker();
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  pool.clear();  // joins
  return out;
}

ClientStats ChatClient::stats() const {
  return {network_attempts_.load(), cache_hits_.load(), cache_misses_.load()};
}

}  // namespace finharness
