#include "finharness/embedding.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace finharness {

using nlohmann::json;

EmbeddingMatrix EmbeddingMatrix::from_rows(const std::vector<std::vector<double>>& rows, bool normalize) {
  EmbeddingMatrix m;
  if (rows.empty()) return m;
  m.dim_ = rows.front().size();
  if (m.dim_ == 0) throw DimensionMismatchError("embedding rows have dimension 0");
  m.data_.reserve(rows.size() * m.dim_);
  bool all_unit = true;
  for (const auto& r : rows) {
    if (r.size() != m.dim_) {
      throw DimensionMismatchError("embedding row of dimension " + std::to_string(r.size()) + ", expected " +
                                   std::to_string(m.dim_));
    }
    double norm = 0;
    for (double v : r) norm += v * v;
    norm = std::sqrt(norm);
    const double scale = (normalize && norm > 0) ? 1.0 / norm : 1.0;
    for (double v : r) m.data_.push_back(v * scale);
    const double final_norm = norm * scale;
    all_unit = all_unit && std::abs(final_norm - 1.0) <= 1e-6;
  }
  m.unit_normalized_ = all_unit;
  return m;
}

std::vector<double> hashed_vector(std::string_view token, std::size_t dim) {
  std::uint64_t state = fnv1a64(token);
  std::vector<double> v(dim);
  for (auto& x : v) {
    // splitmix64
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    x = static_cast<double>(z >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  }
  return v;
}

// ---------------------------------------------------------------------------

LookupEmbeddingProvider::LookupEmbeddingProvider(std::size_t dim, std::string name)
    : dim_(dim), name_(std::move(name)) {
  if (dim_ == 0) throw DimensionMismatchError("embedding dimension must be positive");
}

LookupEmbeddingProvider LookupEmbeddingProvider::from_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::optional<LookupEmbeddingProvider> provider;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream in{std::string(line)};
    std::string token;
    in >> token;
    std::vector<double> vec;
    for (double v; in >> v;) vec.push_back(v);
    if (!in.eof()) throw Error(path.string() + ":" + std::to_string(line_no) + ": bad number");
    if (!provider) provider.emplace(vec.size(), "table:" + path.filename().string() + ":" + sha256_hex(text).substr(0, 12));
    provider->add(std::move(token), std::move(vec));
  }
  if (!provider) throw Error("embedding table " + path.string() + " is empty");
  return std::move(*provider);
}

void LookupEmbeddingProvider::add(std::string token, std::vector<double> vec) {
  if (vec.size() != dim_) {
    throw DimensionMismatchError("vector for '" + token + "' has dimension " + std::to_string(vec.size()) +
                                 ", table uses " + std::to_string(dim_));
  }
  table_.insert_or_assign(std::move(token), std::move(vec));
}

std::string LookupEmbeddingProvider::id() const { return name_ + "/d" + std::to_string(dim_); }

std::vector<std::vector<double>> LookupEmbeddingProvider::embed_batch(std::span<const std::string> tokens) {
  std::vector<std::vector<double>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto it = table_.find(t); it != table_.end()) {
      out.push_back(it->second);
    } else {
      out.push_back(hashed_vector(t, dim_));
    }
  }
  return out;
}

bool LookupEmbeddingProvider::is_fallback(const std::string& token) const { return !table_.contains(token); }

// ---------------------------------------------------------------------------

HttpEmbeddingProvider::HttpEmbeddingProvider(std::shared_ptr<Transport> transport, std::string model,
                                             RetryPolicy policy, Sleeper sleeper)
    : transport_(std::move(transport)), model_(std::move(model)), policy_(std::move(policy)),
      sleeper_(std::move(sleeper)) {}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed_batch(std::span<const std::string> tokens) {
  if (tokens.empty()) return {};
  const json body = {{"model", model_}, {"input", std::vector<std::string>(tokens.begin(), tokens.end())}};
  HttpResponse res;
  try {
    res = post_with_retry(*transport_, kEmbeddingsPath, body.dump(), policy_, sleeper_);
  } catch (const EndpointUnreachableError& e) {
    throw ProviderUnreachableError(e.what());
  }
  json doc;
  try {
    doc = json::parse(res.body);
  } catch (const json::parse_error& e) {
    throw ResponseSchemaError(std::string("embedding response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array() || doc["data"].size() != tokens.size()) {
    throw ResponseSchemaError("embedding response must have one data entry per input");
  }
  std::vector<std::vector<double>> out;
  out.reserve(tokens.size());
  for (const auto& item : doc["data"]) {
    if (!item.is_object() || !item.contains("embedding") || !item["embedding"].is_array()) {
      throw ResponseSchemaError("embedding entry has no vector");
    }
    out.push_back(item["embedding"].get<std::vector<double>>());
  }
  return out;
}

// ---------------------------------------------------------------------------

Embedder::Embedder(EmbeddingProvider& provider, std::shared_ptr<RecordCache> persistent)
    : provider_(provider), persistent_(std::move(persistent)) {}

std::string Embedder::key(const std::string& token) const { return sha256_hex(provider_.id() + '\x1f' + token); }

void Embedder::prefetch(std::span<const std::string> tokens) {
  std::vector<std::string> missing;
  std::set<std::string> queued;
  for (const auto& t : tokens) {
    if (memo_.contains(t) || queued.contains(t)) continue;
    if (persistent_) {
      if (auto hit = persistent_->lookup(key(t)); hit && hit->is_object() && (*hit)["vector"].is_array()) {
        auto vec = (*hit)["vector"].get<std::vector<double>>();
        if (dim_ == 0) dim_ = vec.size();
        if (vec.size() != dim_) throw DimensionMismatchError("cached embedding has a different dimension");
        if (hit->value("fallback", false)) ++fallback_count_;
        memo_.emplace(t, std::move(vec));
        continue;
      }
    }
    queued.insert(t);
    missing.push_back(t);
  }
  if (missing.empty()) return;

  ++provider_calls_;
  auto vecs = provider_.embed_batch(missing);
  if (vecs.size() != missing.size()) throw ResponseSchemaError("provider returned the wrong number of vectors");
  for (std::size_t i = 0; i < missing.size(); ++i) {
    auto& v = vecs[i];
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_ || dim_ == 0) {
      throw DimensionMismatchError("provider returned dimension " + std::to_string(v.size()) + ", expected " +
                                   std::to_string(dim_));
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0) {
      for (double& x : v) x /= norm;
    }
    const bool fallback = provider_.is_fallback(missing[i]);
    if (fallback) ++fallback_count_;
    if (persistent_) {
      persistent_->store(key(missing[i]), {{"provider", provider_.id()}, {"token", missing[i]}},
                         {{"vector", v}, {"fallback", fallback}});
    }
    memo_.emplace(missing[i], std::move(v));
  }
}

EmbeddingMatrix Embedder::embed(std::span<const std::string> tokens) {
  prefetch(tokens);
  std::vector<std::vector<double>> rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens) rows.push_back(memo_.at(t));
  return EmbeddingMatrix::from_rows(rows, true);
}

}  // namespace finharness
