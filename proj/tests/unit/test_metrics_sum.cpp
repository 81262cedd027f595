#include <doctest.h>

#include <cmath>
#include <random>

#include "finharness/embedding.hpp"
#include "finharness/metrics_sum.hpp"
#include "finharness/mock_server.hpp"
#include "support/oracles.hpp"
#include "support/scratch.hpp"

using namespace finharness;

namespace {

TokenSeq seq(std::initializer_list<const char*> words) {
  TokenSeq s;
  for (const char* w : words) s.tokens.emplace_back(w);
  return s;
}

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len, std::size_t alphabet) {
  std::vector<std::string> out(rng() % (max_len + 1));
  for (auto& t : out) t = std::string(1, static_cast<char>('a' + rng() % alphabet));
  return out;
}

}  // namespace

TEST_CASE("tokenizer") {
  CHECK(tokenize("Profits ROSE 10% in Q3-2023!").tokens ==
        std::vector<std::string>{"profits", "rose", "10", "in", "q3", "2023"});
  CHECK(tokenize("").tokens.empty());
  CHECK(tokenize("café au lait").tokens == std::vector<std::string>{"café", "au", "lait"});
}

TEST_CASE("ROUGE hand values") {
  const auto r1 = rouge_n(seq({"the", "cat"}), seq({"the", "cat", "sat"}), 1);
  CHECK(r1.precision == 1.0);
  CHECK(std::abs(r1.recall - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(r1.f1 - 0.8) < 1e-12);

  const auto rl = rouge_l(seq({"a", "b", "c", "d"}), seq({"a", "c", "b", "d"}));
  CHECK(std::abs(rl.precision - 0.75) < 1e-12);
  CHECK(std::abs(rl.recall - 0.75) < 1e-12);
  CHECK(std::abs(rl.f1 - 0.75) < 1e-12);

  CHECK(rouge_n(seq({"a", "a", "a"}), seq({"a"}), 1).precision == doctest::Approx(1.0 / 3));  // clipping
  const auto r2 = rouge_n(seq({"the", "cat", "sat"}), seq({"the", "cat", "ran"}), 2);
  CHECK(r2.f1 == doctest::Approx(0.5));
  CHECK(rouge_n(seq({}), seq({"a"}), 1).f1 == 0.0);
  CHECK(rouge_l(seq({"x"}), seq({"y"})).f1 == 0.0);
}

TEST_CASE("ROUGE-N and ROUGE-L agree with brute-force oracles") {
  std::mt19937_64 rng(2024);
  for (int c = 0; c < 400; ++c) {
    const auto a = random_tokens(rng, 8, 4);
    const auto b = random_tokens(rng, 8, 4);
    CHECK(lcs_length(a, b) == oracle::lcs_bruteforce(a, b));
    TokenSeq ta{a}, tb{b};
    for (int n = 1; n <= 2; ++n) {
      const auto s = rouge_n(ta, tb, n);
      const auto overlap = static_cast<double>(oracle::ngram_overlap(a, b, static_cast<std::size_t>(n)));
      const double cand = a.size() >= static_cast<std::size_t>(n) ? static_cast<double>(a.size() - n + 1) : 0.0;
      CHECK(s.precision == (cand > 0 ? overlap / cand : 0.0));
    }
  }
}

TEST_CASE("BERTScore on orthonormal vectors") {
  const auto ref = EmbeddingMatrix::from_rows({{1, 0}, {0, 1}}, false);
  const auto cand = EmbeddingMatrix::from_rows({{1, 0}}, false);
  const auto s = bert_score(cand, ref);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 0.5);
  CHECK(std::abs(s.f1 - 2.0 / 3.0) < 1e-12);

  const auto opposite = EmbeddingMatrix::from_rows({{-1, 0}}, false);
  CHECK(bert_score(opposite, ref).precision == 0.0);  // negative cosine clamps to 0

  const auto weighted = bert_score(cand, ref, std::vector<double>{1.0}, std::vector<double>{3.0, 1.0});
  CHECK(weighted.recall == doctest::Approx(0.75));

  const auto rs = rescale(s, 0.5);
  CHECK(rs.precision == doctest::Approx(1.0));
  CHECK(rs.recall == doctest::Approx(0.0));
}

TEST_CASE("BERTScore input validation") {
  const auto a = EmbeddingMatrix::from_rows({{1, 0}}, false);
  const auto b = EmbeddingMatrix::from_rows({{1, 0, 0}}, false);
  CHECK_THROWS_AS(bert_score(a, b), DimensionMismatchError);
  const auto not_unit = EmbeddingMatrix::from_rows({{2, 0}}, false);
  CHECK_FALSE(not_unit.unit_normalized());
  CHECK_THROWS_AS(bert_score(not_unit, a), Error);
  const auto normalized = EmbeddingMatrix::from_rows({{3, 4}}, true);
  CHECK(normalized.unit_normalized());
  CHECK(normalized.row(0)[0] == doctest::Approx(0.6));
  CHECK_THROWS_AS(EmbeddingMatrix::from_rows({{1, 0}, {1}}, false), DimensionMismatchError);
}

TEST_CASE("idf weights") {
  const std::vector<TokenSeq> refs{seq({"a", "b"}), seq({"a", "c"})};
  const auto idf = IdfTable::from_references(refs);
  CHECK(idf.weight("a") == doctest::Approx(std::log(3.0 / 3.0)));
  CHECK(idf.weight("b") == doctest::Approx(std::log(3.0 / 2.0)));
  CHECK(idf.weight("zzz") == doctest::Approx(std::log(3.0)));
}

TEST_CASE("lookup provider: table file, fallback and identity") {
  testing_support::ScratchDir dir("emb");
  const auto path = dir / "table.txt";
  write_file_atomic(path, "profit 1 0 0\nloss 0 1 0\n");
  auto p = LookupEmbeddingProvider::from_file(path);
  CHECK(p.dim() == 3);
  CHECK(p.id().find("d3") != std::string::npos);
  const std::vector<std::string> toks{"profit", "unknownword"};
  const auto rows = p.embed_batch(toks);
  CHECK(rows[0] == std::vector<double>{1, 0, 0});
  CHECK(rows[1] == hashed_vector("unknownword", 3));
  CHECK_FALSE(p.is_fallback("profit"));
  CHECK(p.is_fallback("unknownword"));

  write_file_atomic(path, "profit 1 0 0\nloss 0 1\n");
  CHECK_THROWS(LookupEmbeddingProvider::from_file(path));
}

TEST_CASE("Embedder caches per token and persists") {
  testing_support::ScratchDir dir("embedder");
  LookupEmbeddingProvider p(16);
  const std::vector<std::string> toks{"a", "b", "a"};
  {
    auto store = std::make_shared<RecordCache>(dir / "emb.jsonl");
    Embedder e(p, store);
    const auto m = e.embed(toks);
    CHECK(m.rows() == 3);
    CHECK(m.unit_normalized());
    e.embed(toks);
    CHECK(e.provider_calls() == 1);
    CHECK(e.fallback_tokens() == 2);
  }
  auto store = std::make_shared<RecordCache>(dir / "emb.jsonl");
  Embedder again(p, store);
  again.embed(toks);
  CHECK(again.provider_calls() == 0);
}

TEST_CASE("HTTP embedding provider against the mock server") {
  MockChatServer server({.embedding_dim = 8});
  server.start();
  HttpTransport::Options o;
  o.base_url = server.base_url();
  HttpEmbeddingProvider p(std::make_shared<HttpTransport>(o), "mock-emb", RetryPolicy{});
  const std::vector<std::string> toks{"x", "y"};
  const auto rows = p.embed_batch(toks);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == mock_embedding("x", 8));
  CHECK(server.embedding_requests() == 1);
}

TEST_CASE("evaluate_summaries: means, empty candidates, execution modes") {
  LookupEmbeddingProvider p(32);
  const std::vector<std::optional<std::string>> cands{"the cat sat", std::nullopt, "profits rose sharply"};
  const std::vector<std::string> refs{"the cat sat", "anything", "profits fell"};
  Embedder e1(p), e2(p);
  SummEvalOptions serial;
  serial.execution = Execution::Serial;
  const auto a = evaluate_summaries(cands, refs, e1, serial);
  const auto b = evaluate_summaries(cands, refs, e2, {});
  CHECK(a.n_items == 3);
  CHECK(a.n_empty_candidates == 1);
  CHECK(a.rouge1.f1 == doctest::Approx((1.0 + 0.0 + 0.4) / 3.0));
  CHECK(a.rougeL.f1 == b.rougeL.f1);
  CHECK(a.bertscore.f1 == b.bertscore.f1);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(to_json(a)["config"]["tokenizer"] == kTokenizerVersion);

  const std::vector<std::optional<std::string>> none;
  const std::vector<std::string> no_refs;
  CHECK_THROWS_AS(evaluate_summaries(none, no_refs, e1, {}), EmptyEvaluationError);
}
