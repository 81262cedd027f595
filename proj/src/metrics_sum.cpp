#include "finharness/metrics_sum.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <omp.h>

namespace finharness {

std::string_view to_string(RougeVariant v) noexcept {
  switch (v) {
    case RougeVariant::R1: return "rouge1";
    case RougeVariant::R2: return "rouge2";
    case RougeVariant::RL: return "rougeL";
  }
  return "rouge";
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!cur.empty()) {
      out.tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.tokens.push_back(std::move(cur));
  return out;
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

RougeScore make_score(RougeVariant v, double overlap, double cand_total, double ref_total) {
  RougeScore s{v, safe_div(overlap, cand_total), safe_div(overlap, ref_total), 0.0};
  s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);
  return s;
}

std::map<std::vector<std::string_view>, std::size_t> ngram_counts(const TokenSeq& seq, std::size_t n) {
  std::map<std::vector<std::string_view>, std::size_t> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    std::vector<std::string_view> key(seq.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      seq.tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[key];
  }
  return counts;
}

}  // namespace

RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n) {
  if (n < 1) throw Error("rouge_n needs n >= 1");
  const auto un = static_cast<std::size_t>(n);
  const RougeVariant variant = n == 1 ? RougeVariant::R1 : RougeVariant::R2;
  const auto cand = ngram_counts(candidate, un);
  const auto ref = ngram_counts(reference, un);
  double overlap = 0;
  for (const auto& [gram, c] : cand) {
    if (auto it = ref.find(gram); it != ref.end()) overlap += static_cast<double>(std::min(c, it->second));
  }
  const double cand_total = candidate.size() >= un ? static_cast<double>(candidate.size() - un + 1) : 0.0;
  const double ref_total = reference.size() >= un ? static_cast<double>(reference.size() - un + 1) : 0.0;
  return make_score(variant, overlap, cand_total, ref_total);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  const auto l = static_cast<double>(lcs_length(candidate.tokens, reference.tokens));
  return make_score(RougeVariant::RL, l, static_cast<double>(candidate.size()), static_cast<double>(reference.size()));
}

// ---------------------------------------------------------------------------

namespace {

void check_bert_inputs(const EmbeddingMatrix& c, const EmbeddingMatrix& r) {
  if (c.rows() == 0 || r.rows() == 0) throw EmptyEvaluationError();
  if (c.dim() != r.dim()) {
    throw DimensionMismatchError("candidate dimension " + std::to_string(c.dim()) + " vs reference " +
                                 std::to_string(r.dim()));
  }
  if (!c.unit_normalized() || !r.unit_normalized()) throw Error("bert_score needs unit-normalized embeddings");
}

double clamped_cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
  return std::clamp(dot, 0.0, 1.0);
}

}  // namespace

BertScore bert_score(const EmbeddingMatrix& candidate, const EmbeddingMatrix& reference,
                     std::span<const double> candidate_weights, std::span<const double> reference_weights) {
  check_bert_inputs(candidate, reference);
  const std::size_t nc = candidate.rows(), nr = reference.rows();
  if ((!candidate_weights.empty() && candidate_weights.size() != nc) ||
      (!reference_weights.empty() && reference_weights.size() != nr)) {
    throw DimensionMismatchError("weight count does not match embedding rows");
  }

  std::vector<double> best_for_cand(nc, 0.0), best_for_ref(nr, 0.0);
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = 0; j < nr; ++j) {
      const double s = clamped_cosine(candidate.row(i), reference.row(j));
      best_for_cand[i] = std::max(best_for_cand[i], s);
      best_for_ref[j] = std::max(best_for_ref[j], s);
    }
  }
  auto weighted_mean = [](const std::vector<double>& v, std::span<const double> w) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double wi = w.empty() ? 1.0 : w[i];
      num += wi * v[i];
      den += wi;
    }
    return safe_div(num, den);
  };
  BertScore out;
  out.precision = weighted_mean(best_for_cand, candidate_weights);
  out.recall = weighted_mean(best_for_ref, reference_weights);
  out.f1 = safe_div(2.0 * out.precision * out.recall, out.precision + out.recall);
  return out;
}

BertScore bert_score(const EmbeddingMatrix& candidate, const EmbeddingMatrix& reference) {
  return bert_score(candidate, reference, {}, {});
}

BertScore rescale(const BertScore& s, double baseline) {
  if (baseline >= 1.0) throw Error("bertscore baseline must be < 1");
  auto f = [&](double x) { return (x - baseline) / (1.0 - baseline); };
  return {f(s.precision), f(s.recall), f(s.f1)};
}

IdfTable IdfTable::from_references(std::span<const TokenSeq> references) {
  IdfTable t;
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& ref : references) {
    const std::set<std::string> uniq(ref.tokens.begin(), ref.tokens.end());
    for (const auto& w : uniq) ++df[w];
  }
  const auto m = static_cast<double>(references.size());
  t.unseen_ = std::log(m + 1.0);
  for (const auto& [w, n] : df) t.idf_.emplace(w, std::log((m + 1.0) / (static_cast<double>(n) + 1.0)));
  return t;
}

double IdfTable::weight(const std::string& token) const {
  if (auto it = idf_.find(token); it != idf_.end()) return it->second;
  return unseen_;
}

std::vector<double> IdfTable::weights(const TokenSeq& seq) const {
  std::vector<double> w;
  w.reserve(seq.size());
  for (const auto& t : seq.tokens) w.push_back(weight(t));
  return w;
}

// ---------------------------------------------------------------------------

namespace kernels {

namespace {

SummItemScore score_rouge(const std::optional<TokenSeq>& cand, const TokenSeq& ref) {
  SummItemScore s;
  if (!cand || cand->tokens.empty()) {
    s.empty_candidate = true;
    return s;
  }
  s.rouge1 = rouge_n(*cand, ref, 1);
  s.rouge2 = rouge_n(*cand, ref, 2);
  s.rougeL = rouge_l(*cand, ref);
  return s;
}

BertScore score_bert(const BertInput& in) {
  if (!in.candidate || !in.reference || in.candidate->rows() == 0 || in.reference->rows() == 0) return {};
  return bert_score(*in.candidate, *in.reference, in.candidate_weights, in.reference_weights);
}

}  // namespace

std::vector<SummItemScore> rouge_items(std::span<const std::optional<TokenSeq>> candidates,
                                       std::span<const TokenSeq> references, Execution exec) {
  if (candidates.size() != references.size()) throw Error("candidate and reference counts differ");
  std::vector<SummItemScore> out(candidates.size());
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = score_rouge(candidates[i], references[i]);
    return out;
  }
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = score_rouge(candidates[i], references[i]);
  return out;
}

std::vector<BertScore> bert_items(std::span<const BertInput> items, Execution exec) {
  std::vector<BertScore> out(items.size());
  const auto n = static_cast<std::ptrdiff_t>(items.size());
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = score_bert(items[i]);
    return out;
  }
  // Exceptions must not escape an OpenMP region; capture the first one.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = score_bert(items[i]);
    } catch (...) {
#pragma omp critical(finharness_bert_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace kernels

SummEvalReport evaluate_summaries(std::span<const std::optional<std::string>> candidates,
                                  std::span<const std::string> references, Embedder& embedder,
                                  const SummEvalOptions& options) {
  if (candidates.size() != references.size()) throw Error("candidate and reference counts differ");
  if (candidates.empty()) throw EmptyEvaluationError();

  const std::size_t n = candidates.size();
  std::vector<std::optional<TokenSeq>> cand_tokens(n);
  std::vector<TokenSeq> ref_tokens(n);
  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < n; ++i) {
    if (candidates[i]) cand_tokens[i] = tokenize(*candidates[i]);
    ref_tokens[i] = tokenize(references[i]);
    if (cand_tokens[i]) vocab.insert(vocab.end(), cand_tokens[i]->tokens.begin(), cand_tokens[i]->tokens.end());
    vocab.insert(vocab.end(), ref_tokens[i].tokens.begin(), ref_tokens[i].tokens.end());
  }

  auto item_scores = kernels::rouge_items(cand_tokens, ref_tokens, options.execution);

  // Embedding is sequential (provider and cache are not shared across
  // threads); matching is the parallel part.
  const std::size_t fallback_before = embedder.fallback_tokens();
  embedder.prefetch(vocab);
  std::vector<EmbeddingMatrix> cand_emb(n), ref_emb(n);
  std::vector<std::vector<double>> cand_w(n), ref_w(n);
  std::optional<IdfTable> idf;
  if (options.bertscore_idf) idf = IdfTable::from_references(ref_tokens);
  std::vector<kernels::BertInput> inputs(n);
  for (std::size_t i = 0; i < n; ++i) {
    ref_emb[i] = embedder.embed(ref_tokens[i].tokens);
    inputs[i].reference = &ref_emb[i];
    if (!item_scores[i].empty_candidate) {
      cand_emb[i] = embedder.embed(cand_tokens[i]->tokens);
      inputs[i].candidate = &cand_emb[i];
    }
    if (idf) {
      ref_w[i] = idf->weights(ref_tokens[i]);
      if (cand_tokens[i]) cand_w[i] = idf->weights(*cand_tokens[i]);
      inputs[i].reference_weights = ref_w[i];
      inputs[i].candidate_weights = cand_w[i];
    }
  }
  const auto bert = kernels::bert_items(inputs, options.execution);

  SummEvalReport r;
  r.n_items = n;
  r.embedding_provider = embedder.provider().id();
  r.bertscore_idf = options.bertscore_idf;
  r.bertscore_baseline = options.bertscore_baseline;
  r.n_fallback_tokens = embedder.fallback_tokens() - fallback_before;
  // Reduction in item order keeps serial and parallel runs bit-identical.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = item_scores[i];
    if (s.empty_candidate) ++r.n_empty_candidates;
    for (auto [acc, val] : {std::pair{&r.rouge1, &s.rouge1}, std::pair{&r.rouge2, &s.rouge2},
                            std::pair{&r.rougeL, &s.rougeL}}) {
      acc->precision += val->precision;
      acc->recall += val->recall;
      acc->f1 += val->f1;
    }
    r.bertscore.precision += bert[i].precision;
    r.bertscore.recall += bert[i].recall;
    r.bertscore.f1 += bert[i].f1;
  }
  const auto dn = static_cast<double>(n);
  for (auto* acc : {&r.rouge1, &r.rouge2, &r.rougeL}) {
    acc->precision /= dn;
    acc->recall /= dn;
    acc->f1 /= dn;
  }
  r.bertscore.precision /= dn;
  r.bertscore.recall /= dn;
  r.bertscore.f1 /= dn;
  if (options.bertscore_baseline) r.bertscore = rescale(r.bertscore, *options.bertscore_baseline);
  return r;
}

nlohmann::ordered_json to_json(const SummEvalReport& report) {
  auto score = [](const RougeScore& s) {
    return nlohmann::ordered_json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  };
  nlohmann::ordered_json j;
  j["task"] = "summarization";
  j["n_items"] = report.n_items;
  j["n_empty_candidates"] = report.n_empty_candidates;
  j["rouge1"] = score(report.rouge1);
  j["rouge2"] = score(report.rouge2);
  j["rougeL"] = score(report.rougeL);
  j["bertscore"] = {{"precision", report.bertscore.precision},
                    {"recall", report.bertscore.recall},
                    {"f1", report.bertscore.f1}};
  j["config"] = {{"tokenizer", kTokenizerVersion},
                 {"embedding_provider", report.embedding_provider},
                 {"bertscore_idf", report.bertscore_idf},
                 {"bertscore_baseline", report.bertscore_baseline ? nlohmann::ordered_json(*report.bertscore_baseline)
                                                                  : nlohmann::ordered_json(nullptr)},
                 {"n_fallback_tokens", report.n_fallback_tokens}};
  return j;
}

}  // namespace finharness
