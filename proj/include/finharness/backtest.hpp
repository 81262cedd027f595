#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "finharness/common.hpp"
#include "finharness/parse.hpp"

namespace finharness {

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class EmptySeriesError : public Error {
 public:
  EmptySeriesError() : Error("return series is empty") {}
};

class TooShortError : public Error {
 public:
  using Error::Error;
};

class DegenerateSeriesError : public Error {
 public:
  DegenerateSeriesError() : Error("return series has zero variance") {}
};

/// Proleptic Gregorian calendar date, ISO-8601 text form.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  static Date parse(std::string_view iso);  // YYYY-MM-DD
  std::string to_string() const;
  friend auto operator<=>(const Date&, const Date&) = default;
};

class PriceSeries {
 public:
  /// Validates: same lengths, length >= 2, strictly increasing dates,
  /// finite positive closes.
  static PriceSeries create(std::string ticker, std::vector<Date> dates, std::vector<double> closes);

  const std::string& ticker() const noexcept { return ticker_; }
  const std::vector<Date>& dates() const noexcept { return dates_; }
  const std::vector<double>& closes() const noexcept { return closes_; }
  std::size_t size() const noexcept { return closes_.size(); }

 private:
  std::string ticker_;
  std::vector<Date> dates_;
  std::vector<double> closes_;
};

/// CSV with a header and columns date,close (extra columns ignored).
PriceSeries load_prices_csv(const std::filesystem::path& path, std::string ticker);

/// Decision for date[i] earns the return from close[i] to close[i+1].
struct ActionSeries {
  std::vector<Date> dates;
  std::vector<TradingAction> actions;
  std::size_t hold_fallbacks = 0;  // unparseable decisions resolved to Hold
};

/// Parses each raw decision text; unparseable ones become Hold and are counted.
ActionSeries actions_from_raw(std::span<const Date> dates, std::span<const std::string> raw_decisions);

/// Either CSV (date,action with a header; the action column is raw text) or
/// JSON lines as written by `infer` (example_id is the date, raw_text the
/// decision; records carrying an error count as fallbacks).
ActionSeries load_actions(const std::filesystem::path& path);

struct ReturnSeries {
  std::vector<Date> dates;  // the date each return is realized on
  std::vector<double> values;
};

struct EquityCurve {
  std::vector<Date> dates;
  std::vector<double> values;  // values[0] = 1
};

struct Simulation {
  ReturnSeries returns;
  EquityCurve equity;
};

struct SimulateOptions {
  /// Sell means flat instead of short.
  bool long_only = false;
};

/// r_t = exposure(a_{t-1}) * (close_t / close_{t-1} - 1); e_t = e_{t-1} (1 + r_t).
Simulation simulate(const PriceSeries& prices, const ActionSeries& actions, const SimulateOptions& options = {});

enum class CumulativeMode { ArithmeticSum, Compounded };
std::string_view to_string(CumulativeMode m) noexcept;
std::optional<CumulativeMode> parse_cumulative_mode(std::string_view s);

double cumulative_return(std::span<const double> returns, CumulativeMode mode = CumulativeMode::ArithmeticSum);

/// mean(r - rf) / sample_sd(r) * sqrt(periods_per_year).
double sharpe(std::span<const double> returns, double periods_per_year = 252.0, double risk_free_daily = 0.0);

struct Volatility {
  double daily = 0;       // sample (n - 1) standard deviation
  double annualized = 0;  // daily * sqrt(periods_per_year)
};

Volatility volatility(std::span<const double> returns, double periods_per_year = 252.0);

/// Largest (peak - trough) / peak with the peak preceding the trough.
double max_drawdown(std::span<const double> equity);

struct BacktestOptions {
  CumulativeMode cr_mode = CumulativeMode::ArithmeticSum;
  double periods_per_year = 252.0;
  double risk_free_daily = 0.0;
  bool long_only = false;
};

struct BacktestReport {
  std::string ticker;
  std::string label;
  double cr = 0;
  double cr_arithmetic = 0;
  double cr_compounded = 0;
  std::optional<double> sr;  // absent when the series is degenerate
  std::string sr_status = "ok";
  double sd = 0;
  double av = 0;
  double md = 0;
  std::size_t n_days = 0;
  std::size_t n_hold_fallbacks = 0;
  BacktestOptions options;
  EquityCurve equity;
};

BacktestReport run_backtest(const PriceSeries& prices, const ActionSeries& actions, const BacktestOptions& options,
                            std::string label = {});

struct BacktestJob {
  const PriceSeries* prices = nullptr;
  const ActionSeries* actions = nullptr;
  std::string label;
};

struct BacktestOutcome {
  std::optional<BacktestReport> report;
  std::string error;
};

namespace kernels {

/// Independent (ticker, model) backtests; one outcome per job, in order.
std::vector<BacktestOutcome> backtest_batch(std::span<const BacktestJob> jobs, const BacktestOptions& options,
                                            Execution exec);

}  // namespace kernels

/// Report without the curve; the curve goes to CSV/SVG.
nlohmann::ordered_json to_json(const BacktestReport& report);

/// Header date,equity,cumulative_return, one row per curve point.
void write_curve_csv(const EquityCurve& curve, const std::filesystem::path& path);

struct NamedCurve {
  std::string label;
  EquityCurve curve;
};

/// Cumulative-return lines (equity - 1) overlaid in one chart with a legend.
std::string render_overlay_svg(std::span<const NamedCurve> curves, std::string_view title);
void write_overlay_svg(std::span<const NamedCurve> curves, std::string_view title, const std::filesystem::path& path);

}  // namespace finharness
