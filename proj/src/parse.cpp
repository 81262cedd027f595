#include "finharness/parse.hpp"

#include <array>
#include <limits>
#include <regex>

namespace finharness {

std::string_view to_string(TradingAction a) noexcept {
  switch (a) {
    case TradingAction::Buy: return "buy";
    case TradingAction::Hold: return "hold";
    case TradingAction::Sell: return "sell";
  }
  return "hold";
}

std::string_view to_string(ParseFailure f) noexcept {
  switch (f) {
    case ParseFailure::NoLabelFound: return "no_label_found";
    case ParseFailure::AmbiguousLabel: return "ambiguous_label";
    case ParseFailure::NoActionFound: return "no_action_found";
  }
  return "unknown";
}

namespace {

struct WordMatch {
  std::size_t choice = 0;
  TextSpan span;
  bool plural = false;
};

bool boundary_before(std::string_view text, std::size_t pos) {
  return pos == 0 || !is_word_byte(static_cast<unsigned char>(text[pos - 1]));
}

bool boundary_at(std::string_view text, std::size_t pos) {
  return pos >= text.size() || !is_word_byte(static_cast<unsigned char>(text[pos]));
}

// First whole-word occurrence of `word` in `lowered`.
std::optional<WordMatch> first_occurrence(std::string_view lowered, std::string_view word, bool plural) {
  if (word.empty()) return std::nullopt;
  for (auto pos = lowered.find(word); pos != std::string_view::npos; pos = lowered.find(word, pos + 1)) {
    if (!boundary_before(lowered, pos)) continue;
    const std::size_t end = pos + word.size();
    if (boundary_at(lowered, end)) return WordMatch{0, {pos, end}, false};
    if (plural && end < lowered.size() && lowered[end] == 's' && boundary_at(lowered, end + 1)) {
      return WordMatch{0, {pos, end + 1}, true};
    }
  }
  return std::nullopt;
}

struct Earliest {
  std::optional<WordMatch> match;
  bool ambiguous = false;
};

Earliest earliest_match(std::string_view raw, std::span<const std::string> words, bool plural) {
  const std::string lowered = to_lower_ascii(raw);
  std::vector<WordMatch> hits;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (auto m = first_occurrence(lowered, words[i], plural)) {
      m->choice = i;
      hits.push_back(*m);
    }
  }
  if (hits.empty()) return {};

  std::size_t first = std::numeric_limits<std::size_t>::max();
  for (const auto& h : hits) first = std::min(first, h.span.begin);

  std::vector<WordMatch> at_first;
  for (const auto& h : hits) {
    if (h.span.begin == first) at_first.push_back(h);
  }
  if (at_first.size() > 1) {
    // An exact match beats a plural reading of a shorter choice.
    std::erase_if(at_first, [](const WordMatch& m) { return m.plural; });
    if (at_first.size() != 1) return {std::nullopt, true};
  }
  return {at_first.front(), false};
}

}  // namespace

ParseOutcome<Label> parse_label(std::string_view raw, std::span<const std::string> choices,
                                const LabelParseOptions& options) {
  if (choices.empty()) throw Error("parse_label needs at least one choice");
  const auto e = earliest_match(raw, choices, options.plural_tolerant);
  if (e.ambiguous) return ParseOutcome<Label>::failed(ParseFailure::AmbiguousLabel, std::string(raw));
  if (!e.match) return ParseOutcome<Label>::failed(ParseFailure::NoLabelFound, std::string(raw));
  return ParseOutcome<Label>::success(Label{choices[e.match->choice]}, e.match->span, std::string(raw));
}

ParseOutcome<TradingAction> parse_trading_action(std::string_view raw) {
  static const std::array<std::string, 3> words{"buy", "sell", "hold"};
  static constexpr std::array<TradingAction, 3> actions{TradingAction::Buy, TradingAction::Sell, TradingAction::Hold};
  const auto e = earliest_match(raw, words, false);
  if (!e.match) return ParseOutcome<TradingAction>::failed(ParseFailure::NoActionFound, std::string(raw));
  return ParseOutcome<TradingAction>::success(actions[e.match->choice], e.match->span, std::string(raw));
}

namespace {

const std::regex& role_prefix() {
  static const std::regex re(R"(^(\*\*)?\s*(summary|answer|response|output|assistant)\s*(\*\*)?\s*:\s*(\*\*)?)",
                             std::regex::icase | std::regex::optimize);
  return re;
}

bool strip_quotes(std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
    return true;
  }
  static constexpr std::string_view open = "\xE2\x80\x9C";
  static constexpr std::string_view close = "\xE2\x80\x9D";
  if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
    s = s.substr(open.size(), s.size() - open.size() - close.size());
    return true;
  }
  return false;
}

}  // namespace

std::optional<std::string> try_extract_summary(std::string_view raw) {
  std::string s(trim(raw));
  for (bool changed = true; changed;) {
    changed = false;
    std::smatch m;
    if (std::regex_search(s, m, role_prefix()) && m.length(0) > 0) {
      s = std::string(trim(std::string_view(s).substr(static_cast<std::size_t>(m.length(0)))));
      changed = true;
    }
    if (strip_quotes(s)) {
      s = std::string(trim(s));
      changed = true;
    }
  }
  if (s.empty()) return std::nullopt;
  return s;
}

std::string extract_summary(std::string_view raw) {
  auto s = try_extract_summary(raw);
  if (!s) throw EmptySummaryError();
  return *std::move(s);
}

}  // namespace finharness
