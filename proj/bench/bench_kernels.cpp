// Serial reference vs OpenMP kernels on synthetic workloads.
#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "finharness/backtest.hpp"
#include "finharness/embedding.hpp"
#include "finharness/metrics_sum.hpp"

using namespace finharness;

namespace {

std::string random_text(std::mt19937_64& rng, std::size_t words) {
  static const char* vocab[] = {"revenue", "rose", "fell", "quarter", "profit", "bank", "rates", "guidance",
                                "shares", "market", "growth", "loss", "margin", "cost", "sales", "outlook"};
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += vocab[rng() % std::size(vocab)];
  }
  return s;
}

struct RougeWorkload {
  std::vector<std::optional<TokenSeq>> candidates;
  std::vector<TokenSeq> references;
};

const RougeWorkload& rouge_workload() {
  static const RougeWorkload w = [] {
    RougeWorkload out;
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
      out.candidates.emplace_back(tokenize(random_text(rng, 60)));
      out.references.push_back(tokenize(random_text(rng, 80)));
    }
    return out;
  }();
  return w;
}

void BM_Rouge(benchmark::State& state) {
  const auto& w = rouge_workload();
  const auto exec = state.range(0) ? Execution::Parallel : Execution::Serial;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::rouge_items(w.candidates, w.references, exec));
}
BENCHMARK(BM_Rouge)->Arg(0)->Arg(1)->ArgNames({"parallel"})->Unit(benchmark::kMillisecond)->UseRealTime();

struct BertWorkload {
  std::vector<EmbeddingMatrix> mats;
  std::vector<kernels::BertInput> items;
};

const BertWorkload& bert_workload() {
  static const BertWorkload w = [] {
    BertWorkload out;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    constexpr int kItems = 500;
    out.mats.reserve(2 * kItems);
    for (int i = 0; i < 2 * kItems; ++i) {
      std::vector<std::vector<double>> rows(40 + rng() % 40, std::vector<double>(64));
      for (auto& r : rows) {
        for (auto& v : r) v = g(rng);
      }
      out.mats.push_back(EmbeddingMatrix::from_rows(rows, true));
    }
    for (int i = 0; i < kItems; ++i) out.items.push_back({&out.mats[2 * i], &out.mats[2 * i + 1], {}, {}});
    return out;
  }();
  return w;
}

void BM_BertScore(benchmark::State& state) {
  const auto& w = bert_workload();
  const auto exec = state.range(0) ? Execution::Parallel : Execution::Serial;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::bert_items(w.items, exec));
}
BENCHMARK(BM_BertScore)->Arg(0)->Arg(1)->ArgNames({"parallel"})->Unit(benchmark::kMillisecond)->UseRealTime();

struct BacktestWorkload {
  std::vector<PriceSeries> prices;
  std::vector<ActionSeries> actions;
  std::vector<BacktestJob> jobs;
};

const BacktestWorkload& backtest_workload() {
  static const BacktestWorkload w = [] {
    BacktestWorkload out;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.01);
    constexpr int kJobs = 256;
    std::vector<Date> dates;
    for (int y = 2000; dates.size() < 2521; ++y) {
      for (int m = 1; m <= 12 && dates.size() < 2521; ++m) {
        for (int d = 1; d <= 21 && dates.size() < 2521; ++d) dates.push_back({y, m, d});
      }
    }
    out.prices.reserve(kJobs);
    out.actions.reserve(kJobs);
    for (int j = 0; j < kJobs; ++j) {
      std::vector<double> closes{100.0};
      for (std::size_t i = 1; i < dates.size(); ++i) closes.push_back(closes.back() * (1.0 + g(rng)));
      out.prices.push_back(PriceSeries::create("T" + std::to_string(j), dates, closes));
      ActionSeries a;
      a.dates.assign(dates.begin(), dates.end() - 1);
      for (std::size_t i = 1; i < dates.size(); ++i) a.actions.push_back(static_cast<TradingAction>(rng() % 3));
      out.actions.push_back(std::move(a));
    }
    for (int j = 0; j < kJobs; ++j) out.jobs.push_back({&out.prices[j], &out.actions[j], "m"});
    return out;
  }();
  return w;
}

void BM_Backtest(benchmark::State& state) {
  const auto& w = backtest_workload();
  const auto exec = state.range(0) ? Execution::Parallel : Execution::Serial;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::backtest_batch(w.jobs, {}, exec));
}
BENCHMARK(BM_Backtest)->Arg(0)->Arg(1)->ArgNames({"parallel"})->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
