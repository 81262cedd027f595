// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "finharness/backtest.hpp"
#include "finharness/cli.hpp"
#include "finharness/embedding.hpp"
#include "finharness/metrics_cls.hpp"
#include "finharness/metrics_sum.hpp"
#include "finharness/mock_server.hpp"
#include "finharness/parse.hpp"
#include "support/oracles.hpp"
#include "support/properties.hpp"
#include "support/scratch.hpp"

using namespace finharness;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

/// Published (SD, AV) pairs for four tickers x three models. AV should equal
/// SD * sqrt(252) up to the rounding of SD to three decimals.
Outcome volatility_table_consistency() {
  struct Cell {
    const char* ticker;
    int model;
    double sd;
    double av;
  };
  static const Cell cells[] = {
      {"FORM", 1, 0.014, 0.217}, {"FORM", 2, 0.015, 0.237}, {"FORM", 3, 0.010, 0.165},
      {"JNJ", 1, 0.006, 0.101},  {"JNJ", 2, 0.006, 0.097},  {"JNJ", 3, 0.009, 0.102},
      {"MSFT", 1, 0.009, 0.144}, {"MSFT", 2, 0.009, 0.143}, {"MSFT", 3, 0.009, 0.144},
      {"DRIV", 1, 0.006, 0.101}, {"DRIV", 2, 0.007, 0.116}, {"DRIV", 3, 0.009, 0.142},
  };
  constexpr double kTolerance = 0.006;
  const auto t0 = Clock::now();
  const double annualize = std::sqrt(BacktestOptions{}.periods_per_year);
  std::string misses;
  int ok = 0;
  for (const auto& c : cells) {
    const double av = c.sd * annualize;
    if (std::abs(av - c.av) <= kTolerance) {
      ++ok;
    } else {
      misses += std::string(misses.empty() ? "" : "; ") + c.ticker + "/M" + std::to_string(c.model) + " SD " +
                fmt(c.sd, 3) + " -> AV " + fmt(av, 4) + " vs " + fmt(c.av, 3) + " (off " +
                fmt(std::abs(av - c.av), 3) + ")";
    }
  }
  const double elapsed = seconds_since(t0);
  const int total = static_cast<int>(std::size(cells));
  Outcome o;
  o.pass = ok == total && elapsed < 1.0;
  o.detail = std::to_string(ok) + "/" + std::to_string(total) + " pairs within " + fmt(kTolerance) + ", " +
             fmt(elapsed * 1e3, 3) + " ms" + (misses.empty() ? "" : "; mismatches: " + misses);
  return o;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  std::mt19937_64 rng(20240601);
  std::size_t rouge_bad = 0, md_bad = 0, mcc_bad = 0, mcc_k_bad = 0;
  double mcc_worst = 0;

  for (int c = 0; c < 1000; ++c) {
    auto gen = [&] {
      std::vector<std::string> s(rng() % 9);
      for (auto& t : s) t = std::string(1, static_cast<char>('a' + rng() % 5));
      return s;
    };
    const auto a = gen(), b = gen();
    const auto lcs = static_cast<double>(oracle::lcs_bruteforce(a, b));
    const double p = a.empty() ? 0.0 : lcs / static_cast<double>(a.size());
    const double r = b.empty() ? 0.0 : lcs / static_cast<double>(b.size());
    const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    const auto got = rouge_l(TokenSeq{a}, TokenSeq{b});
    if (got.precision != p || got.recall != r || got.f1 != f) ++rouge_bad;
  }

  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int c = 0; c < 1000; ++c) {
    std::vector<double> e(1 + rng() % 12);
    for (auto& v : e) v = u(rng);
    if (max_drawdown(e) != oracle::max_drawdown_bruteforce(e)) ++md_bad;
  }

  for (int c = 0; c < 1000; ++c) {
    const std::size_t tp = rng() % 50, fn = rng() % 50, fp = rng() % 50, tn = rng() % 50;
    const auto cm = ConfusionMatrix::from_counts({"p", "n"}, {{tp, fn}, {fp, tn}});
    if (cm.total() == 0) continue;
    const double want = oracle::mcc_binary(static_cast<double>(tp), static_cast<double>(tn), static_cast<double>(fp),
                                           static_cast<double>(fn));
    const double err = std::abs(mcc(cm) - want);
    mcc_worst = std::max(mcc_worst, err);
    if (err > 1e-12) ++mcc_bad;
  }

  // Multi-class matrices, some with parse failures, against the item-level correlation.
  for (int c = 0; c < 1000; ++c) {
    const int k = 2 + static_cast<int>(rng() % 4);
    std::vector<std::string> classes;
    for (int i = 0; i < k; ++i) classes.push_back("c" + std::to_string(i));
    std::vector<std::string> gold;
    std::vector<ParseOutcome<Label>> pred;
    std::vector<int> gi, pi;
    const bool failures = rng() % 2;
    for (std::size_t i = 0, n = 1 + rng() % 60; i < n; ++i) {
      const int g = static_cast<int>(rng() % k);
      const int q = static_cast<int>(rng() % (failures ? k + 1 : k));
      gold.push_back(classes[g]);
      pred.push_back(q == k ? ParseOutcome<Label>::failed(ParseFailure::NoLabelFound, "")
                            : ParseOutcome<Label>::success(Label{classes[q]}, {0, 1}, classes[q]));
      gi.push_back(g);
      pi.push_back(q);
    }
    const double err = std::abs(mcc(confusion(gold, pred, classes)) - oracle::mcc_by_items(gi, pi, k));
    mcc_worst = std::max(mcc_worst, err);
    if (err > 1e-12) ++mcc_k_bad;
  }

  Outcome o;
  o.pass = rouge_bad == 0 && md_bad == 0 && mcc_bad == 0 && mcc_k_bad == 0;
  o.detail = "ROUGE-L mismatches " + std::to_string(rouge_bad) + "/1000, MD " + std::to_string(md_bad) +
             "/1000, MCC binary " + std::to_string(mcc_bad) + "/1000, MCC k-class " + std::to_string(mcc_k_bad) +
             "/1000 (max |err| " + fmt(mcc_worst, 3) + ")";
  return o;
}

// ---------------------------------------------------------------------------

Outcome hand_values() {
  constexpr double kTol = 1e-9;
  std::vector<std::string> failed;
  int checked = 0;
  auto expect = [&](const std::string& name, double got, double want) {
    ++checked;
    if (!(std::abs(got - want) <= kTol)) failed.push_back(name + " got " + fmt(got, 12) + " want " + fmt(want, 12));
  };

  const auto bin = ConfusionMatrix::from_counts({"pos", "neg"}, {{6, 2}, {1, 3}});
  expect("F1 binary", f1(bin, F1Averaging::binary("pos")), 0.8);
  expect("MCC", mcc(bin), 16.0 / std::sqrt(7.0 * 8.0 * 4.0 * 5.0));
  const auto skew = ConfusionMatrix::from_counts({"a", "b"}, {{2, 0}, {2, 0}});
  expect("accuracy single-class", accuracy(skew), 0.5);
  expect("macro-F1 single-class", f1(skew, F1Averaging::macro()), 1.0 / 3.0);

  const auto r1 = rouge_n(TokenSeq{{"the", "cat"}}, TokenSeq{{"the", "cat", "sat"}}, 1);
  expect("ROUGE-1 P", r1.precision, 1.0);
  expect("ROUGE-1 R", r1.recall, 2.0 / 3.0);
  expect("ROUGE-1 F", r1.f1, 0.8);
  const auto rl = rouge_l(TokenSeq{{"a", "b", "c", "d"}}, TokenSeq{{"a", "c", "b", "d"}});
  expect("ROUGE-L P", rl.precision, 0.75);
  expect("ROUGE-L R", rl.recall, 0.75);
  expect("ROUGE-L F", rl.f1, 0.75);

  const auto bs = bert_score(EmbeddingMatrix::from_rows({{1, 0}}, false),
                             EmbeddingMatrix::from_rows({{1, 0}, {0, 1}}, false));
  expect("BERTScore P", bs.precision, 1.0);
  expect("BERTScore R", bs.recall, 0.5);
  expect("BERTScore F", bs.f1, 2.0 / 3.0);

  const auto prices = PriceSeries::create("T", props::business_dates(3), {100, 110, 99});
  ActionSeries acts;
  acts.dates.assign(prices.dates().begin(), prices.dates().end() - 1);
  acts.actions = {TradingAction::Buy, TradingAction::Buy};
  const auto sim = simulate(prices, acts);
  expect("r[0]", sim.returns.values[0], 0.10);
  expect("r[1]", sim.returns.values[1], -0.10);
  expect("equity[0]", sim.equity.values[0], 1.0);
  expect("equity[1]", sim.equity.values[1], 1.10);
  expect("equity[2]", sim.equity.values[2], 0.99);
  expect("CR compounded", cumulative_return(sim.returns.values, CumulativeMode::Compounded), -0.01);

  const std::vector<double> r{0.02, 0.00, 0.01, -0.01};
  expect("mean", oracle::mean(r), 0.005);
  expect("sample SD", volatility(r).daily, std::sqrt(0.0005 / 3.0));
  expect("SR", sharpe(r), 0.005 / std::sqrt(0.0005 / 3.0) * std::sqrt(252.0));
  ++checked;
  if (std::abs(sharpe(r) - 6.148) > 5e-4) failed.push_back("SR not ~6.148");

  expect("MD [1,1.2,0.9,1.1]", max_drawdown(std::vector<double>{1, 1.2, 0.9, 1.1}), 0.25);
  expect("MD [1,0.5,1.0,0.4]", max_drawdown(std::vector<double>{1, 0.5, 1.0, 0.4}), 0.6);

  Outcome o;
  o.pass = failed.empty();
  o.detail = std::to_string(checked - static_cast<int>(failed.size())) + "/" + std::to_string(checked) +
             " values within 1e-9";
  for (const auto& f : failed) o.detail += "; " + f;
  return o;
}

// ---------------------------------------------------------------------------

Outcome property_suites() {
  constexpr std::size_t kCases = 500;
  const auto t0 = Clock::now();
  testing_support::ScratchDir scratch("acceptance_props");
  const std::vector<std::pair<std::string, props::Result>> suites{
      {"parse single-occurrence", props::parse_single_occurrence(kCases, 11)},
      {"summary idempotence", props::summary_idempotence(kCases, 12)},
      {"backtest invariants", props::backtest_invariants(kCases, 13)},
      {"corpus invariants", props::corpus_invariants(kCases, 14, scratch.path())},
  };
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = elapsed < 60.0;
  std::string parts;
  for (const auto& [name, r] : suites) {
    if (!r.ok() || r.cases < kCases) o.pass = false;
    parts += (parts.empty() ? "" : ", ") + name + " " + std::to_string(r.cases - r.failures) + "/" +
             std::to_string(r.cases);
    if (!r.ok()) parts += " [" + r.first_failure + "]";
  }
  o.detail = parts + "; " + fmt(elapsed, 3) + " s";
  return o;
}

// ---------------------------------------------------------------------------

void write_pipeline_inputs(const std::filesystem::path& dir) {
  std::mt19937_64 rng(77);
  std::string cls, sum, trd, px = "date,close\n";
  static const char* words[] = {"revenue", "margin", "guidance", "shares", "bank", "rates", "growth",
                                "loss",    "profit", "quarter",  "market", "costs", "demand", "outlook"};
  auto sentence = [&](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += std::string(i ? " " : "") + words[rng() % std::size(words)];
    return s;
  };
  for (int i = 0; i < 40; ++i) {
    cls += nlohmann::json{{"id", "c" + std::to_string(i)},
                          {"instruction", "Classify the sentence as claim or premise."},
                          {"input", sentence(12)},
                          {"output", rng() % 2 ? "claim" : "premise"},
                          {"choices", {"claim", "premise"}}}
               .dump() +
           "\n";
    sum += nlohmann::json{{"id", "s" + std::to_string(i)},
                          {"instruction", "Summarize the article."},
                          {"input", sentence(60)},
                          {"output", sentence(15)}}
               .dump() +
           "\n";
  }
  const auto dates = props::business_dates(31);
  double close = 100.0;
  for (std::size_t i = 0; i < dates.size(); ++i) {
    px += dates[i].to_string() + "," + fmt(close, 8) + "\n";
    if (i + 1 < dates.size()) {
      trd += nlohmann::json{{"id", dates[i].to_string()},
                            {"instruction", "Decide today's trade."},
                            {"input", "Close " + fmt(close, 8) + ". " + sentence(10)}}
                 .dump() +
             "\n";
    }
    close *= 1.0 + (static_cast<double>(rng() % 2001) - 1000.0) / 50000.0;
  }
  write_file_atomic(dir / "classification.jsonl", cls);
  write_file_atomic(dir / "summarization.jsonl", sum);
  write_file_atomic(dir / "trading.jsonl", trd);
  write_file_atomic(dir / "prices.csv", px);
}

/// fuse -> infer -> eval -> backtest -> report into `run`; returns the first failing step.
std::string run_pipeline(const std::filesystem::path& in, const std::filesystem::path& run, const std::string& url) {
  std::ostringstream out, err;
  const std::string r = run.string();
  auto step = [&](std::vector<std::string> args) {
    const int code = run_cli(args, out, err);
    return code == 0 ? std::string() : args[0] + " exited " + std::to_string(code) + ": " + err.str();
  };
  const std::vector<std::vector<std::string>> steps{
      {"fuse", "--input", "classification=" + (in / "classification.jsonl").string(), "--input",
       "summarization=" + (in / "summarization.jsonl").string(), "--seed", "7", "--out-dir", r},
      {"infer", "--task", "classification", "--dataset", (in / "classification.jsonl").string(), "--base-url", url,
       "--model", "mock", "--out-dir", r, "--max-in-flight", "4"},
      {"infer", "--task", "summarization", "--dataset", (in / "summarization.jsonl").string(), "--base-url", url,
       "--model", "mock", "--out-dir", r, "--max-in-flight", "4"},
      {"infer", "--task", "trading", "--dataset", (in / "trading.jsonl").string(), "--base-url", url, "--model",
       "mock", "--out-dir", r, "--max-in-flight", "4"},
      {"eval", "--task", "classification", "--dataset", (in / "classification.jsonl").string(), "--predictions",
       (run / "raw_classification.jsonl").string(), "--out-dir", r},
      {"eval", "--task", "summarization", "--dataset", (in / "summarization.jsonl").string(), "--predictions",
       (run / "raw_summarization.jsonl").string(), "--out-dir", r, "--bertscore-idf"},
      {"backtest", "--prices", (in / "prices.csv").string(), "--ticker", "MOCK", "--actions",
       "mock=" + (run / "raw_trading.jsonl").string(), "--out-dir", r},
      {"report", "--run-dir", r},
  };
  for (const auto& s : steps) {
    if (auto e = step(s); !e.empty()) return e;
  }
  return {};
}

Outcome pipeline_determinism() {
  const auto t0 = Clock::now();
  testing_support::ScratchDir dir("acceptance_pipeline");
  write_pipeline_inputs(dir.path());
  MockChatServer server;
  server.start();

  Outcome o;
  for (const char* run : {"run_a", "run_b"}) {
    if (auto e = run_pipeline(dir.path(), dir / run, server.base_url()); !e.empty()) {
      o.detail = std::string(run) + ": " + e;
      return o;
    }
  }
  const std::vector<std::string> reports{
      "fused_corpus.jsonl",  "raw_classification.jsonl", "raw_summarization.jsonl", "raw_trading.jsonl",
      "eval_classification.json", "eval_summarization.json", "backtest_MOCK_mock.json", "curve_MOCK_mock.csv",
      "curves_MOCK.svg",     "summary.json"};
  std::vector<std::string> differing;
  for (const auto& f : reports) {
    if (read_file(dir / "run_a" / f) != read_file(dir / "run_b" / f)) differing.push_back(f);
  }
  const double elapsed = seconds_since(t0);
  o.pass = differing.empty() && elapsed < 30.0;
  o.detail = std::to_string(reports.size() - differing.size()) + "/" + std::to_string(reports.size()) +
             " report files byte-identical across two runs, " + std::to_string(server.chat_requests()) +
             " mock calls, " + fmt(elapsed, 3) + " s";
  for (const auto& f : differing) o.detail += "; differs: " + f;
  return o;
}

// ---------------------------------------------------------------------------

Outcome robustness_corpus() {
  const auto path = std::filesystem::path(FINHARNESS_TEST_DATA) / "robustness.jsonl";
  const std::string text = read_file(path);
  std::size_t total = 0, success = 0, crashes = 0;
  std::vector<std::string> misses;
  for (auto line : split_lines(text)) {
    if (trim(line).empty()) continue;
    ++total;
    const auto rec = nlohmann::json::parse(line);
    const std::string kind = rec["kind"];
    const auto& expected = rec["expected"];
    std::optional<std::string> got;
    try {
      if (kind == "classification") {
        const auto choices = rec["choices"].get<std::vector<std::string>>();
        const auto out = parse_label(rec["raw"].get<std::string>(), choices);
        if (out.ok()) got = out.result->value;
      } else if (kind == "trading") {
        const auto out = parse_trading_action(rec["raw"].get<std::string>());
        if (out.ok()) got = std::string(to_string(*out.result));
      } else {
        got = try_extract_summary(rec["raw"].get<std::string>());
      }
    } catch (const std::exception&) {
      ++crashes;
      continue;
    }
    const bool ok = expected.is_null() ? !got.has_value() : got == expected.get<std::string>();
    if (ok) {
      ++success;
    } else {
      misses.push_back(std::to_string(total));
    }
  }
  const double rate = total ? static_cast<double>(success) / static_cast<double>(total) : 0.0;
  Outcome o;
  o.pass = total >= 40 && rate >= 0.9 && crashes == 0;
  o.detail = std::to_string(success) + "/" + std::to_string(total) + " extracted as annotated (" + fmt(rate * 100, 4) +
             "%), " + std::to_string(crashes) + " crashes";
  if (!misses.empty()) {
    o.detail += "; misses at records";
    for (const auto& m : misses) o.detail += " " + m;
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"volatility table: AV = SD*sqrt(252) within 0.006, < 1 s", volatility_table_consistency},
      {"metric oracle equivalence (ROUGE-L, MD exact; MCC 1e-12)", oracle_equivalence},
      {"metric hand values to 1e-9", hand_values},
      {"property suites >= 500 cases each, < 60 s", property_suites},
      {"pipeline determinism against the mock server, < 30 s", pipeline_determinism},
      {"parsing robustness corpus >= 90%, 0 crashes", robustness_corpus},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  |  " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
