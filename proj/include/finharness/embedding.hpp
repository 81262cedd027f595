#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "finharness/common.hpp"
#include "finharness/llm_client.hpp"

namespace finharness {

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class ProviderUnreachableError : public Error {
 public:
  using Error::Error;
};

/// Row-major matrix with one embedding per token.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  /// All rows must share one dimension. With `normalize`, each row is scaled
  /// to unit Euclidean norm (zero rows stay zero and clear the flag).
  static EmbeddingMatrix from_rows(const std::vector<std::vector<double>>& rows, bool normalize);

  std::size_t rows() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool unit_normalized() const noexcept { return unit_normalized_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

 private:
  std::vector<double> data_;
  std::size_t dim_ = 0;
  bool unit_normalized_ = false;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Stable identity used in cache keys and reports.
  virtual std::string id() const = 0;
  /// Raw (not necessarily normalized) vectors, one per token.
  virtual std::vector<std::vector<double>> embed_batch(std::span<const std::string> tokens) = 0;
  /// True when the last vectors for `token` came from a fallback rule.
  virtual bool is_fallback(const std::string& token) const { (void)token; return false; }
};

/// Deterministic pseudo-random vector for a token, components in [-1, 1].
std::vector<double> hashed_vector(std::string_view token, std::size_t dim);

/// Table lookup with a hashed fallback for unknown tokens. The table file is
/// whitespace separated text, one `token v1 v2 ... vd` per line (GloVe layout).
class LookupEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit LookupEmbeddingProvider(std::size_t dim, std::string name = "hash");
  static LookupEmbeddingProvider from_file(const std::filesystem::path& path);

  void add(std::string token, std::vector<double> vec);
  std::size_t dim() const noexcept { return dim_; }

  std::string id() const override;
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> tokens) override;
  bool is_fallback(const std::string& token) const override;

 private:
  std::size_t dim_;
  std::string name_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

/// POST {model, input: [tokens]} to `<base>/v1/embeddings`, expecting
/// {data: [{embedding: [...]}, ...]} in input order.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  static constexpr std::string_view kEmbeddingsPath = "/v1/embeddings";

  HttpEmbeddingProvider(std::shared_ptr<Transport> transport, std::string model, RetryPolicy policy,
                        Sleeper sleeper = real_sleeper());

  std::string id() const override { return "http:" + model_; }
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> tokens) override;

 private:
  std::shared_ptr<Transport> transport_;
  std::string model_;
  RetryPolicy policy_;
  Sleeper sleeper_;
};

/// Caches unit vectors by (provider id, token), optionally persisted in the
/// same record format as the completion cache.
class Embedder {
 public:
  explicit Embedder(EmbeddingProvider& provider, std::shared_ptr<RecordCache> persistent = nullptr);

  /// One unit-normalized row per token; cached tokens skip the provider.
  EmbeddingMatrix embed(std::span<const std::string> tokens);

  /// Fetches everything missing from the cache in one provider call.
  void prefetch(std::span<const std::string> tokens);

  std::size_t fallback_tokens() const noexcept { return fallback_count_; }
  std::size_t provider_calls() const noexcept { return provider_calls_; }
  const EmbeddingProvider& provider() const noexcept { return provider_; }

 private:
  std::string key(const std::string& token) const;

  EmbeddingProvider& provider_;
  std::shared_ptr<RecordCache> persistent_;
  std::unordered_map<std::string, std::vector<double>> memo_;
  std::size_t dim_ = 0;
  std::size_t fallback_count_ = 0;
  std::size_t provider_calls_ = 0;
};

}  // namespace finharness
