#include <doctest.h>

#include "finharness/parse.hpp"
#include "support/properties.hpp"

using namespace finharness;

namespace {
const std::vector<std::string> kArg{"claim", "premise"};
}

TEST_CASE("parse_label basics") {
  const auto a = parse_label("The answer is Premise.", kArg);
  REQUIRE(a.ok());
  CHECK(a.result->value == "premise");
  CHECK(a.matched_span->begin == 14);
  CHECK(a.matched_span->end == 21);

  const auto b = parse_label("claim. No wait, premise", kArg);
  REQUIRE(b.ok());
  CHECK(b.result->value == "claim");

  const auto c = parse_label("I cannot determine this.", kArg);
  CHECK_FALSE(c.ok());
  CHECK(c.failure == ParseFailure::NoLabelFound);
  CHECK_FALSE(c.matched_span.has_value());
  CHECK(c.raw_text == "I cannot determine this.");
}

TEST_CASE("parse_label word boundaries and plurals") {
  CHECK_FALSE(parse_label("reclaimed value", kArg).ok());
  CHECK_FALSE(parse_label("claimant", kArg).ok());
  CHECK(parse_label("These are CLAIMS.", kArg).result->value == "claim");
  CHECK_FALSE(parse_label("These are claims.", kArg, {.plural_tolerant = false}).ok());
  CHECK(parse_label("**claim**", kArg).ok());
  CHECK(parse_label("label:claim", kArg).ok());
  CHECK_FALSE(parse_label("claimé", kArg).ok());  // non-ASCII bytes are word bytes
}

TEST_CASE("parse_label prefers the exact word over a plural reading at one position") {
  const std::vector<std::string> choices{"yes", "ye"};
  const auto out = parse_label("yes", choices);
  REQUIRE(out.ok());
  CHECK(out.result->value == "yes");
}

TEST_CASE("parse_trading_action") {
  CHECK(*parse_trading_action("Decision: BUY because momentum").result == TradingAction::Buy);
  CHECK(*parse_trading_action("hold").result == TradingAction::Hold);
  CHECK(*parse_trading_action("I'd sell, not buy.").result == TradingAction::Sell);
  const auto none = parse_trading_action("The stock looks risky.");
  CHECK_FALSE(none.ok());
  CHECK(none.failure == ParseFailure::NoActionFound);
  CHECK_FALSE(parse_trading_action("buyback announced").ok());
  CHECK_FALSE(parse_trading_action("holds steady").ok());
  CHECK(exposure(TradingAction::Buy) == 1);
  CHECK(exposure(TradingAction::Hold) == 0);
  CHECK(exposure(TradingAction::Sell) == -1);
}

TEST_CASE("extract_summary") {
  CHECK(extract_summary("Summary: Profits rose 10%.") == "Profits rose 10%.");
  CHECK(extract_summary("Profits rose.") == "Profits rose.");
  CHECK(extract_summary("  **Summary:** \"Profits rose.\"  ") == "Profits rose.");
  CHECK(extract_summary("Assistant: Summary: cut rates") == "cut rates");
  CHECK(extract_summary("Summary of results: ok") == "Summary of results: ok");
  CHECK_THROWS_AS(extract_summary("   "), EmptySummaryError);
  CHECK_THROWS_AS(extract_summary("Summary:"), EmptySummaryError);
  CHECK_FALSE(try_extract_summary("\"\"").has_value());
}

TEST_CASE("parse properties (generated)") {
  const auto single = props::parse_single_occurrence(300, 7);
  INFO(single.first_failure);
  CHECK(single.ok());
  const auto idem = props::summary_idempotence(300, 8);
  INFO(idem.first_failure);
  CHECK(idem.ok());
}
