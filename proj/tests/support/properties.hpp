#pragma once

// Generated-case property checks shared by the unit tests and the acceptance
// runner. Each check returns how many cases ran and the first failure seen.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "finharness/backtest.hpp"
#include "finharness/corpus.hpp"
#include "finharness/parse.hpp"
#include "support/oracles.hpp"

namespace props {

using namespace finharness;

struct Result {
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first_failure;

  void fail(const std::string& what) {
    if (failures++ == 0) first_failure = what;
  }
  bool ok() const { return failures == 0; }
};

inline const std::vector<std::string>& label_pool() {
  static const std::vector<std::string> pool = {"claim",   "premise", "positive", "negative", "neutral",
                                                "bullish", "bearish", "yes",      "no",       "maybe",
                                                "fact",    "opinion", "risk",     "growth",   "decline"};
  return pool;
}

inline const std::vector<std::string>& filler_pool() {
  static const std::vector<std::string> pool = {
      "the", "answer", "label", "this", "sentence", "is", "best", "described", "as", "a", "given", "text",
      "I", "think", "category", "based", "on", "context", "final", "output", "it", "reads", "like", "clearly",
      "of", "in", "Llama", "assistant", "response", "2023", "Q3", "model", "says", "seems", "to", "be"};
  return pool;
}

inline std::string random_case(std::string w, std::mt19937_64& rng) {
  switch (rng() % 3) {
    case 0: return w;
    case 1:
      for (auto& c : w) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      return w;
    default:
      w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
      return w;
  }
}

inline std::string random_separator(std::mt19937_64& rng) {
  static const char* seps[] = {" ", " ", " ", ", ", ". ", ": ", "\n", " - ", " (", ") ", " \"", "\" ", " **", "** "};
  return seps[rng() % std::size(seps)];
}

/// raw text with exactly one whole-word choice among filler -> that choice.
inline Result parse_single_occurrence(std::size_t cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Result r;
  const auto& labels = label_pool();
  const auto& filler = filler_pool();
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    std::vector<std::string> choices = labels;
    std::shuffle(choices.begin(), choices.end(), rng);
    choices.resize(2 + rng() % 4);
    const std::string& target = choices[rng() % choices.size()];
    const std::size_t words = rng() % 12;
    const std::size_t at = rng() % (words + 1);
    std::string raw;
    for (std::size_t i = 0; i <= words; ++i) {
      if (i == at) raw += random_case(target, rng) + random_separator(rng);
      if (i < words) raw += filler[rng() % filler.size()] + random_separator(rng);
    }
    const auto out = parse_label(raw, choices);
    if (!out.ok() || out.result->value != target) {
      r.fail("parse_label(\"" + raw + "\") expected " + target);
      continue;
    }
    const auto span = raw.substr(out.matched_span->begin, out.matched_span->end - out.matched_span->begin);
    if (to_lower_ascii(span) != target) r.fail("span \"" + span + "\" does not cover " + target);

    // Same property for trading actions.
    static const char* actions[] = {"buy", "sell", "hold"};
    const int a = static_cast<int>(rng() % 3);
    std::string decision;
    for (std::size_t i = 0; i <= words; ++i) {
      if (i == at) decision += random_case(actions[a], rng) + random_separator(rng);
      if (i < words) decision += filler[rng() % filler.size()] + random_separator(rng);
    }
    const auto act = parse_trading_action(decision);
    const TradingAction expected = a == 0 ? TradingAction::Buy : a == 1 ? TradingAction::Sell : TradingAction::Hold;
    if (!act.ok() || *act.result != expected) r.fail("parse_trading_action(\"" + decision + "\")");
  }
  return r;
}

inline std::string random_summary_like(std::mt19937_64& rng) {
  static const char* parts[] = {"Summary:", "summary :", "**Summary:**", "Answer:", "Response:", "Output:",
                                "assistant:", "\"", "'", "“", "”", " ", "\n", "\t",
                                "Profits rose 10%.", "The bank cut rates", "revenue: up", "\"quoted\" words",
                                "Summary", "it's", "n/a", "**", "Q3 EPS beat"};
  std::string s;
  const std::size_t n = rng() % 8;
  for (std::size_t i = 0; i < n; ++i) s += parts[rng() % std::size(parts)];
  return s;
}

/// extract_summary(extract_summary(x)) == extract_summary(x); empties agree.
inline Result summary_idempotence(std::size_t cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Result r;
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const std::string raw = random_summary_like(rng);
    const auto once = try_extract_summary(raw);
    if (!once) continue;
    const auto twice = try_extract_summary(*once);
    if (twice != once) r.fail("not idempotent on \"" + raw + "\"");
  }
  return r;
}

inline std::vector<Date> business_dates(std::size_t n) {
  std::vector<Date> out;
  for (int y = 2000; out.size() < n; ++y) {
    for (int m = 1; m <= 12 && out.size() < n; ++m) {
      for (int d = 1; d <= 28 && out.size() < n; ++d) out.push_back({y, m, d});
    }
  }
  return out;
}

inline PriceSeries random_prices(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 0.02);
  std::vector<double> closes{50.0 + static_cast<double>(rng() % 100)};
  for (std::size_t i = 1; i < n; ++i) closes.push_back(closes.back() * std::exp(g(rng)));
  return PriceSeries::create("X", business_dates(n), closes);
}

inline ActionSeries random_actions(std::mt19937_64& rng, const PriceSeries& p) {
  ActionSeries a;
  a.dates.assign(p.dates().begin(), p.dates().end() - 1);
  for (std::size_t i = 0; i + 1 < p.size(); ++i) a.actions.push_back(static_cast<TradingAction>(rng() % 3));
  return a;
}

inline ActionSeries constant_actions(const PriceSeries& p, TradingAction act) {
  ActionSeries a;
  a.dates.assign(p.dates().begin(), p.dates().end() - 1);
  a.actions.assign(p.size() - 1, act);
  return a;
}

inline TradingAction flipped(TradingAction a) {
  return a == TradingAction::Buy ? TradingAction::Sell : a == TradingAction::Sell ? TradingAction::Buy : a;
}

/// No-lookahead, sign flip, all-Hold, buy-and-hold, AV/SD and MD oracle.
inline Result backtest_invariants(std::size_t cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Result r;
  const double root = std::sqrt(252.0);
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const std::size_t n = 3 + rng() % 60;
    const auto prices = random_prices(rng, n);
    const auto actions = random_actions(rng, prices);
    const auto base = simulate(prices, actions);
    const std::string tag = "case " + std::to_string(c) + ": ";

    // No-lookahead: perturb close[t+1]; returns realized at or before t are unchanged.
    {
      const std::size_t t = rng() % (n - 1);
      std::vector<double> closes = prices.closes();
      closes[t + 1] *= 1.0 + 0.5 * (static_cast<double>(rng() % 1000) / 1000.0 - 0.4);
      const auto moved = simulate(PriceSeries::create("X", prices.dates(), closes), actions);
      for (std::size_t j = 0; j < t; ++j) {
        if (moved.returns.values[j] != base.returns.values[j]) {
          r.fail(tag + "return " + std::to_string(j) + " moved after perturbing close " + std::to_string(t + 1));
          break;
        }
      }
    }

    // Sign flip.
    {
      ActionSeries neg = actions;
      for (auto& a : neg.actions) a = flipped(a);
      const auto fs = simulate(prices, neg);
      for (std::size_t j = 0; j < fs.returns.values.size(); ++j) {
        if (fs.returns.values[j] != -base.returns.values[j]) {
          r.fail(tag + "sign flip did not negate return " + std::to_string(j));
          break;
        }
      }
      const auto a = run_backtest(prices, actions, {});
      const auto b = run_backtest(prices, neg, {});
      if (b.cr_arithmetic != -a.cr_arithmetic) r.fail(tag + "sign flip did not negate CR");
      if (b.sd != a.sd || b.av != a.av) r.fail(tag + "sign flip changed SD/AV");
      if (a.sr.has_value() != b.sr.has_value() || (a.sr && *b.sr != -*a.sr)) r.fail(tag + "sign flip did not negate SR");
      if (std::abs(a.av - a.sd * root) > 1e-15 * std::max(1.0, a.av)) r.fail(tag + "AV != SD*sqrt(252)");
      std::vector<double> eq = a.equity.values;
      if (max_drawdown(eq) != oracle::max_drawdown_bruteforce(eq)) r.fail(tag + "MD differs from brute force");
    }

    // All-Hold.
    {
      const auto hold = run_backtest(prices, constant_actions(prices, TradingAction::Hold), {});
      if (hold.cr_arithmetic != 0.0 || hold.cr_compounded != 0.0 || hold.md != 0.0) r.fail(tag + "all-Hold not flat");
      if (hold.sr.has_value() || hold.sr_status != "degenerate_series") r.fail(tag + "all-Hold SR not degenerate");
      bool threw = false;
      try {
        sharpe(simulate(prices, constant_actions(prices, TradingAction::Hold)).returns.values);
      } catch (const DegenerateSeriesError&) {
        threw = true;
      }
      if (!threw) r.fail(tag + "sharpe on all-Hold did not raise DegenerateSeries");
    }

    // Buy every day reproduces the asset's own returns.
    {
      const auto buy = simulate(prices, constant_actions(prices, TradingAction::Buy));
      const auto& cl = prices.closes();
      for (std::size_t j = 0; j + 1 < cl.size(); ++j) {
        if (buy.returns.values[j] != cl[j + 1] / cl[j] - 1.0) {
          r.fail(tag + "buy-and-hold return mismatch");
          break;
        }
      }
    }
  }
  return r;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_words) {
  static const char* words[] = {"revenue", "rose", "\"quoted\"", "café", "back\\slash", "tab\there",
                                "net",     "loss", "€",      "EPS",     "new\nline",    "{input}",
                                "50%",     "Q4",   "收益", "plain"};
  std::string s;
  const std::size_t n = 1 + rng() % max_words;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += words[rng() % std::size(words)];
  }
  return s;
}

inline TaskDataset random_dataset(std::mt19937_64& rng, TaskId task, std::size_t n, const std::string& id_prefix) {
  TaskDataset ds{task, Split::Train, {}};
  for (std::size_t i = 0; i < n; ++i) {
    TaskExample e;
    e.task = task;
    e.example_id = id_prefix + std::to_string(i);
    e.instruction = random_text(rng, 6);
    e.input = random_text(rng, 20);
    if (task == TaskId::Classification) {
      e.choices = {"claim", "premise"};
      e.gold = e.choices[rng() % 2];
    } else {
      e.gold = random_text(rng, 8);
    }
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

inline std::vector<FusedExample> sorted(std::vector<FusedExample> v) {
  std::sort(v.begin(), v.end());
  return v;
}

/// Conservation, determinism, round-trip, split exhaustiveness.
inline Result corpus_invariants(std::size_t cases, std::uint64_t seed, const std::filesystem::path& scratch) {
  std::mt19937_64 rng(seed);
  Result r;
  std::filesystem::create_directories(scratch);
  for (std::size_t c = 0; c < cases; ++c, ++r.cases) {
    const std::string tag = "case " + std::to_string(c) + ": ";
    const std::size_t na = 2 + rng() % 30, nb = 2 + rng() % 30;
    const auto a = random_dataset(rng, TaskId::Classification, na, "a");
    const auto b = random_dataset(rng, TaskId::Summarization, nb, rng() % 2 ? "a" : "b");
    const std::uint64_t s = rng();
    const std::vector<TaskDataset> inputs{a, b};

    const auto fd = fuse(inputs, s);
    if (fd.examples.size() != na + nb || fd.manifest.total != na + nb ||
        fd.manifest.counts.at(TaskId::Classification) != na || fd.manifest.counts.at(TaskId::Summarization) != nb) {
      r.fail(tag + "conservation");
    }
    std::vector<FusedExample> expected;
    for (const auto& e : a.examples) expected.push_back({e, TaskId::Classification});
    for (const auto& e : b.examples) expected.push_back({e, TaskId::Summarization});
    if (sorted(fd.examples) != sorted(expected)) r.fail(tag + "fused multiset differs from inputs");

    const auto again = fuse(inputs, s);
    if (serialize_instruction_corpus(again) != serialize_instruction_corpus(fd)) r.fail(tag + "fuse not deterministic");

    const auto path = scratch / ("corpus_" + std::to_string(c % 8) + ".jsonl");
    export_instruction_corpus(fd, path);
    if (sorted(load_instruction_corpus(path)) != sorted(fd.examples)) r.fail(tag + "export/load round-trip");

    const SplitSpec spec{Fraction(1 + rng() % 9, 10), s};
    const auto [tr, va] = split_train_val(a, spec);
    const auto [tr2, va2] = split_train_val(a, spec);
    if (tr.examples != tr2.examples || va.examples != va2.examples) r.fail(tag + "split not deterministic");
    std::set<std::string> ids;
    for (const auto& e : tr.examples) ids.insert(e.example_id);
    for (const auto& e : va.examples) ids.insert(e.example_id);
    if (ids.size() != na || tr.examples.size() + va.examples.size() != na) r.fail(tag + "split not a partition");
    if (tr.examples.size() != spec.train_fraction.ceil_times(na)) r.fail(tag + "split train size");
  }
  return r;
}

}  // namespace props
