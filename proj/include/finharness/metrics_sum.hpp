#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "finharness/common.hpp"
#include "finharness/embedding.hpp"

namespace finharness {

class EmptyEvaluationError : public Error {
 public:
  EmptyEvaluationError() : Error("no summaries to score") {}
};

/// Recorded in every report; ROUGE values depend on the tokenizer.
inline constexpr std::string_view kTokenizerVersion = "alnum-lower-v1";

struct TokenSeq {
  std::vector<std::string> tokens;
  std::size_t size() const noexcept { return tokens.size(); }
  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

/// Lowercase ASCII, split on anything that is not ASCII alphanumeric.
/// Bytes >= 0x80 are kept inside tokens so UTF-8 words survive intact.
TokenSeq tokenize(std::string_view text);

enum class RougeVariant { R1, R2, RL };
std::string_view to_string(RougeVariant v) noexcept;

struct RougeScore {
  RougeVariant variant = RougeVariant::R1;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Clipped n-gram overlap. Empty denominators give 0.
RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n);

/// LCS-based, beta = 1.
RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

struct BertScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Greedy max-cosine matching, negative similarities clamped to 0.
/// Both matrices must be unit-normalized, share a dimension and be non-empty.
BertScore bert_score(const EmbeddingMatrix& candidate, const EmbeddingMatrix& reference);

/// Importance-weighted variant; weights are per row and need not sum to 1.
BertScore bert_score(const EmbeddingMatrix& candidate, const EmbeddingMatrix& reference,
                     std::span<const double> candidate_weights, std::span<const double> reference_weights);

/// (x - baseline) / (1 - baseline) applied to P, R and F.
BertScore rescale(const BertScore& s, double baseline);

/// idf(w) = log((M + 1) / (df(w) + 1)) over M reference documents.
/// Unseen words get log(M + 1).
class IdfTable {
 public:
  static IdfTable from_references(std::span<const TokenSeq> references);
  double weight(const std::string& token) const;
  std::vector<double> weights(const TokenSeq& seq) const;

 private:
  double unseen_ = 0;
  std::unordered_map<std::string, double> idf_;
};

struct SummEvalOptions {
  bool bertscore_idf = false;
  std::optional<double> bertscore_baseline;
  Execution execution = Execution::Parallel;
};

/// Per-item scores; the unit the serial and OpenMP kernels both produce.
struct SummItemScore {
  RougeScore rouge1{RougeVariant::R1};
  RougeScore rouge2{RougeVariant::R2};
  RougeScore rougeL{RougeVariant::RL};
  bool empty_candidate = false;
};

struct SummEvalReport {
  RougeScore rouge1{RougeVariant::R1};
  RougeScore rouge2{RougeVariant::R2};
  RougeScore rougeL{RougeVariant::RL};
  BertScore bertscore;
  std::size_t n_items = 0;
  std::size_t n_empty_candidates = 0;
  std::size_t n_fallback_tokens = 0;
  std::string embedding_provider;
  bool bertscore_idf = false;
  std::optional<double> bertscore_baseline;
};

namespace kernels {

/// ROUGE-1/2/L for every (candidate, reference) pair. An absent candidate
/// scores 0 and is flagged.
std::vector<SummItemScore> rouge_items(std::span<const std::optional<TokenSeq>> candidates,
                                       std::span<const TokenSeq> references, Execution exec);

struct BertInput {
  const EmbeddingMatrix* candidate = nullptr;  // null for an empty candidate
  const EmbeddingMatrix* reference = nullptr;
  std::span<const double> candidate_weights;  // empty = uniform
  std::span<const double> reference_weights;
};

std::vector<BertScore> bert_items(std::span<const BertInput> items, Execution exec);

}  // namespace kernels

/// Corpus means over items. `candidates[i]` is nullopt when the model output
/// could not be turned into a summary; such items score 0 and are counted.
SummEvalReport evaluate_summaries(std::span<const std::optional<std::string>> candidates,
                                  std::span<const std::string> references, Embedder& embedder,
                                  const SummEvalOptions& options = {});

nlohmann::ordered_json to_json(const SummEvalReport& report);

}  // namespace finharness
