#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finharness/common.hpp"

namespace finharness {

/// A classification label in lowercase canonical form.
struct Label {
  std::string value;
  friend bool operator==(const Label&, const Label&) = default;
};

enum class TradingAction { Buy, Hold, Sell };

/// Signed position implied by an action: Buy +1, Hold 0, Sell -1.
constexpr int exposure(TradingAction a) noexcept {
  switch (a) {
    case TradingAction::Buy: return 1;
    case TradingAction::Sell: return -1;
    case TradingAction::Hold: return 0;
  }
  return 0;
}

std::string_view to_string(TradingAction a) noexcept;

enum class ParseFailure { NoLabelFound, AmbiguousLabel, NoActionFound };
std::string_view to_string(ParseFailure f) noexcept;

/// Byte offsets [begin, end) into the raw text.
struct TextSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

/// `matched_span` is present iff `result` is; `failure` iff it is not.
template <class T>
struct ParseOutcome {
  std::optional<T> result;
  std::optional<TextSpan> matched_span;
  std::optional<ParseFailure> failure;
  std::string raw_text;

  bool ok() const noexcept { return result.has_value(); }

  static ParseOutcome success(T value, TextSpan span, std::string raw) {
    return {std::move(value), span, std::nullopt, std::move(raw)};
  }
  static ParseOutcome failed(ParseFailure why, std::string raw) {
    return {std::nullopt, std::nullopt, why, std::move(raw)};
  }
};

struct LabelParseOptions {
  /// Accept a trailing "s" on a choice ("claims" matches "claim").
  bool plural_tolerant = true;
};

/// Earliest case-insensitive whole-word occurrence of any choice wins.
/// Word boundaries are any byte that is not ASCII alphanumeric or >= 0x80.
/// `choices` must be non-empty, lowercase and distinct.
ParseOutcome<Label> parse_label(std::string_view raw, std::span<const std::string> choices,
                                const LabelParseOptions& options = {});

/// Earliest whole-word buy / sell / hold, case-insensitive. No plural tolerance.
ParseOutcome<TradingAction> parse_trading_action(std::string_view raw);

class EmptySummaryError : public Error {
 public:
  EmptySummaryError() : Error("summary is empty after cleanup") {}
};

/// Strips leading role prefixes ("Summary:", "Answer:", "**Summary:**", ...),
/// wrapping quotes and surrounding whitespace until nothing changes.
/// Throws EmptySummaryError when nothing is left.
std::string extract_summary(std::string_view raw);
std::optional<std::string> try_extract_summary(std::string_view raw);

}  // namespace finharness
