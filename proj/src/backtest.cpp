#include "finharness/backtest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <omp.h>

namespace finharness {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Dates

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : days[m - 1];
}

// Days since 1970-01-01 (Howard Hinnant's days_from_civil).
long long day_number(const Date& d) {
  const int y = d.year - (d.month <= 2 ? 1 : 0);
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned mp = static_cast<unsigned>(d.month + (d.month > 2 ? -3 : 9));
  const unsigned doy = (153 * mp + 2) / 5 + static_cast<unsigned>(d.day) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<long long>(era) * 146097 + static_cast<long long>(doe) - 719468;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Date Date::parse(std::string_view iso) {
  const auto t = trim(iso);
  auto field = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(t.data() + pos, t.data() + pos + len, v);
    if (ec != std::errc{} || ptr != t.data() + pos + len) throw Error("invalid date: " + std::string(iso));
    return v;
  };
  if (t.size() != 10 || t[4] != '-' || t[7] != '-') throw Error("invalid date: " + std::string(iso));
  Date d{field(0, 4), field(5, 2), field(8, 2)};
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
    throw Error("invalid date: " + std::string(iso));
  }
  return d;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

// ---------------------------------------------------------------------------
// Inputs

PriceSeries PriceSeries::create(std::string ticker, std::vector<Date> dates, std::vector<double> closes) {
  if (dates.size() != closes.size()) throw AlignmentError("price dates and closes differ in length");
  if (closes.size() < 2) throw TooShortError("price series needs at least 2 closes");
  for (std::size_t i = 0; i < closes.size(); ++i) {
    if (!(closes[i] > 0.0) || !std::isfinite(closes[i])) {
      throw Error("close on " + dates[i].to_string() + " must be positive and finite");
    }
    if (i > 0 && !(dates[i - 1] < dates[i])) {
      throw AlignmentError("price dates are not strictly increasing at " + dates[i].to_string());
    }
  }
  PriceSeries p;
  p.ticker_ = std::move(ticker);
  p.dates_ = std::move(dates);
  p.closes_ = std::move(closes);
  return p;
}

namespace {

// Minimal RFC 4180 field splitter: quoted fields may hold commas and "".
std::vector<std::string> split_csv_row(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::size_t column(std::string_view name, const std::filesystem::path& path) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (to_lower_ascii(trim(header[i])) == name) return i;
    }
    throw Error(path.string() + ": missing column '" + std::string(name) + "'");
  }
};

CsvTable read_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  CsvTable t;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (t.header.empty()) {
      t.header = split_csv_row(line);
    } else {
      t.rows.push_back(split_csv_row(line));
      t.line_numbers.push_back(line_no);
    }
  }
  if (t.header.empty()) throw Error(path.string() + ": empty CSV");
  return t;
}

}  // namespace

PriceSeries load_prices_csv(const std::filesystem::path& path, std::string ticker) {
  const auto t = read_csv(path);
  const auto date_col = t.column("date", path);
  const auto close_col = t.column("close", path);
  std::vector<Date> dates;
  std::vector<double> closes;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto where = path.string() + ":" + std::to_string(t.line_numbers[r]);
    if (row.size() <= std::max(date_col, close_col)) throw Error(where + ": too few columns");
    dates.push_back(Date::parse(row[date_col]));
    const auto text = trim(row[close_col]);
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) throw Error(where + ": bad close '" + row[close_col] + "'");
    closes.push_back(v);
  }
  return PriceSeries::create(std::move(ticker), std::move(dates), std::move(closes));
}

ActionSeries actions_from_raw(std::span<const Date> dates, std::span<const std::string> raw_decisions) {
  if (dates.size() != raw_decisions.size()) throw AlignmentError("dates and decisions differ in length");
  ActionSeries a;
  a.dates.assign(dates.begin(), dates.end());
  for (const auto& raw : raw_decisions) {
    const auto parsed = parse_trading_action(raw);
    if (parsed.ok()) {
      a.actions.push_back(*parsed.result);
    } else {
      a.actions.push_back(TradingAction::Hold);
      ++a.hold_fallbacks;
    }
  }
  return a;
}

ActionSeries load_actions(const std::filesystem::path& path) {
  std::vector<Date> dates;
  std::vector<std::string> raw;
  if (path.extension() == ".jsonl" || path.extension() == ".json") {
    const std::string text = read_file(path);
    std::size_t line_no = 0;
    for (auto line : split_lines(text)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto where = path.string() + ":" + std::to_string(line_no);
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error&) {
        throw Error(where + ": invalid JSON");
      }
      if (!rec.is_object() || !rec.contains("example_id") || !rec["example_id"].is_string()) {
        throw Error(where + ": missing example_id");
      }
      dates.push_back(Date::parse(rec["example_id"].get<std::string>()));
      const auto& text_field = rec.value("raw_text", json(nullptr));
      if (text_field.is_string()) {
        raw.push_back(text_field.get<std::string>());
      } else {
        raw.emplace_back();  // failed inference; resolves to a Hold fallback
      }
    }
  } else {
    const auto t = read_csv(path);
    const auto date_col = t.column("date", path);
    const auto action_col = t.column("action", path);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      if (row.size() <= std::max(date_col, action_col)) {
        throw Error(path.string() + ":" + std::to_string(t.line_numbers[r]) + ": too few columns");
      }
      dates.push_back(Date::parse(row[date_col]));
      raw.push_back(row[action_col]);
    }
  }
  return actions_from_raw(dates, raw);
}

// ---------------------------------------------------------------------------
// Simulation and metrics

Simulation simulate(const PriceSeries& prices, const ActionSeries& actions, const SimulateOptions& options) {
  const auto& closes = prices.closes();
  const auto& pdates = prices.dates();
  if (actions.actions.size() != actions.dates.size()) throw AlignmentError("action dates and actions differ in length");
  if (actions.actions.size() + 1 != closes.size()) {
    throw AlignmentError("expected " + std::to_string(closes.size() - 1) + " actions for " +
                         std::to_string(closes.size()) + " closes, got " + std::to_string(actions.actions.size()));
  }
  for (std::size_t i = 0; i < actions.dates.size(); ++i) {
    if (actions.dates[i] != pdates[i]) {
      throw AlignmentError("action " + std::to_string(i) + " is dated " + actions.dates[i].to_string() +
                           " but the price series has " + pdates[i].to_string());
    }
  }

  Simulation sim;
  const std::size_t t_max = closes.size() - 1;
  sim.returns.dates.assign(pdates.begin() + 1, pdates.end());
  sim.returns.values.resize(t_max);
  sim.equity.dates = pdates;
  sim.equity.values.resize(closes.size());
  sim.equity.values[0] = 1.0;
  for (std::size_t t = 1; t <= t_max; ++t) {
    int pos = exposure(actions.actions[t - 1]);
    if (options.long_only && pos < 0) pos = 0;
    const double r = static_cast<double>(pos) * (closes[t] / closes[t - 1] - 1.0);
    sim.returns.values[t - 1] = r;
    sim.equity.values[t] = sim.equity.values[t - 1] * (1.0 + r);
  }
  return sim;
}

std::string_view to_string(CumulativeMode m) noexcept {
  return m == CumulativeMode::Compounded ? "compounded" : "arithmetic_sum";
}

std::optional<CumulativeMode> parse_cumulative_mode(std::string_view s) {
  const auto v = to_lower_ascii(s);
  if (v == "arithmetic" || v == "arithmetic_sum" || v == "sum") return CumulativeMode::ArithmeticSum;
  if (v == "compounded" || v == "compound") return CumulativeMode::Compounded;
  return std::nullopt;
}

double cumulative_return(std::span<const double> returns, CumulativeMode mode) {
  if (returns.empty()) throw EmptySeriesError();
  if (mode == CumulativeMode::ArithmeticSum) return std::accumulate(returns.begin(), returns.end(), 0.0);
  double growth = 1.0;
  for (double r : returns) growth *= 1.0 + r;
  return growth - 1.0;
}

namespace {

bool all_equal(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sample_sd(std::span<const double> v) {
  if (all_equal(v)) return 0.0;
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double sharpe(std::span<const double> returns, double periods_per_year, double risk_free_daily) {
  if (returns.size() < 2) throw TooShortError("sharpe needs at least 2 returns");
  if (all_equal(returns)) throw DegenerateSeriesError();
  return (mean(returns) - risk_free_daily) / sample_sd(returns) * std::sqrt(periods_per_year);
}

Volatility volatility(std::span<const double> returns, double periods_per_year) {
  if (returns.size() < 2) throw TooShortError("volatility needs at least 2 returns");
  const double sd = sample_sd(returns);
  return {sd, sd * std::sqrt(periods_per_year)};
}

double max_drawdown(std::span<const double> equity) {
  double peak = -std::numeric_limits<double>::infinity();
  double md = 0.0;
  for (double e : equity) {
    peak = std::max(peak, e);
    if (peak > 0.0) md = std::max(md, (peak - e) / peak);
  }
  return md;
}

BacktestReport run_backtest(const PriceSeries& prices, const ActionSeries& actions, const BacktestOptions& options,
                            std::string label) {
  auto sim = simulate(prices, actions, {options.long_only});
  const auto& r = sim.returns.values;

  BacktestReport rep;
  rep.ticker = prices.ticker();
  rep.label = std::move(label);
  rep.options = options;
  rep.n_days = r.size();
  rep.n_hold_fallbacks = actions.hold_fallbacks;
  rep.cr_arithmetic = cumulative_return(r, CumulativeMode::ArithmeticSum);
  rep.cr_compounded = cumulative_return(r, CumulativeMode::Compounded);
  rep.cr = options.cr_mode == CumulativeMode::ArithmeticSum ? rep.cr_arithmetic : rep.cr_compounded;
  const auto vol = volatility(r, options.periods_per_year);
  rep.sd = vol.daily;
  rep.av = vol.annualized;
  try {
    rep.sr = sharpe(r, options.periods_per_year, options.risk_free_daily);
  } catch (const DegenerateSeriesError&) {
    rep.sr_status = "degenerate_series";
  }
  rep.md = max_drawdown(sim.equity.values);
  rep.equity = std::move(sim.equity);
  return rep;
}

namespace kernels {

std::vector<BacktestOutcome> backtest_batch(std::span<const BacktestJob> jobs, const BacktestOptions& options,
                                            Execution exec) {
  std::vector<BacktestOutcome> out(jobs.size());
  auto one = [&](std::size_t i) {
    try {
      out[i].report = run_backtest(*jobs[i].prices, *jobs[i].actions, options, jobs[i].label);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  };
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
    return out;
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
  return out;
}

}  // namespace kernels

nlohmann::ordered_json to_json(const BacktestReport& report) {
  nlohmann::ordered_json j;
  j["ticker"] = report.ticker;
  j["label"] = report.label;
  j["n_days"] = report.n_days;
  j["n_hold_fallbacks"] = report.n_hold_fallbacks;
  j["CR"] = report.cr;
  j["cr_mode"] = to_string(report.options.cr_mode);
  j["cr_arithmetic"] = report.cr_arithmetic;
  j["cr_compounded"] = report.cr_compounded;
  j["SR"] = report.sr ? nlohmann::ordered_json(*report.sr) : nlohmann::ordered_json(nullptr);
  j["sr_status"] = report.sr_status;
  j["SD"] = report.sd;
  j["AV"] = report.av;
  j["MD"] = report.md;
  j["conventions"] = {{"periods_per_year", report.options.periods_per_year},
                      {"risk_free_daily", report.options.risk_free_daily},
                      {"long_only", report.options.long_only},
                      {"stdev", "sample"},
                      {"exposure", "full_notional_signed"},
                      {"transaction_costs", 0.0}};
  return j;
}

void write_curve_csv(const EquityCurve& curve, const std::filesystem::path& path) {
  std::string out = "date,equity,cumulative_return\n";
  for (std::size_t i = 0; i < curve.values.size(); ++i) {
    out += curve.dates[i].to_string();
    out += ',';
    out += format_double(curve.values[i]);
    out += ',';
    out += format_double(curve.values[i] - 1.0);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::string render_overlay_svg(std::span<const NamedCurve> curves, std::string_view title) {
  if (curves.empty()) throw Error("overlay needs at least one curve");
  static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  constexpr double width = 800, height = 450, left = 70, right = 20, top = 40, bottom = 50;

  long long x_min = std::numeric_limits<long long>::max(), x_max = std::numeric_limits<long long>::min();
  double y_min = 0.0, y_max = 0.0;
  for (const auto& c : curves) {
    if (c.curve.values.empty()) throw Error("curve '" + c.label + "' is empty");
    for (std::size_t i = 0; i < c.curve.values.size(); ++i) {
      const auto x = day_number(c.curve.dates[i]);
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, c.curve.values[i] - 1.0);
      y_max = std::max(y_max, c.curve.values[i] - 1.0);
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max - y_min < 1e-9) {
    y_max += 0.01;
    y_min -= 0.01;
  }
  const double pw = width - left - right, ph = height - top - bottom;
  auto sx = [&](long long x) { return left + pw * static_cast<double>(x - x_min) / static_cast<double>(x_max - x_min); };
  auto sy = [&](double y) { return top + ph * (y_max - y) / (y_max - y_min); };

  auto escape = [](std::string_view s) {
    std::string o;
    for (char c : s) {
      switch (c) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        default: o += c;
      }
    }
    return o;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"450\" viewBox=\"0 0 800 450\" "
         "font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"800\" height=\"450\" fill=\"white\"/>\n";
  svg += "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + escape(title) + "</text>\n";
  svg += "<line x1=\"" + fixed(left, 2) + "\" y1=\"" + fixed(top, 2) + "\" x2=\"" + fixed(left, 2) + "\" y2=\"" +
         fixed(top + ph, 2) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fixed(left, 2) + "\" y1=\"" + fixed(top + ph, 2) + "\" x2=\"" + fixed(left + pw, 2) +
         "\" y2=\"" + fixed(top + ph, 2) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fixed(left, 2) + "\" y1=\"" + fixed(sy(0.0), 2) + "\" x2=\"" + fixed(left + pw, 2) +
         "\" y2=\"" + fixed(sy(0.0), 2) + "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  for (double y : {y_min, 0.0, y_max}) {
    svg += "<text x=\"" + fixed(left - 6, 2) + "\" y=\"" + fixed(sy(y) + 4, 2) + "\" text-anchor=\"end\">" +
           fixed(y, 3) + "</text>\n";
  }
  const Date* first = &curves.front().curve.dates.front();
  const Date* last = &curves.front().curve.dates.back();
  for (const auto& c : curves) {
    if (c.curve.dates.front() < *first) first = &c.curve.dates.front();
    if (*last < c.curve.dates.back()) last = &c.curve.dates.back();
  }
  svg += "<text x=\"" + fixed(left, 2) + "\" y=\"" + fixed(top + ph + 18, 2) + "\">" + first->to_string() + "</text>\n";
  svg += "<text x=\"" + fixed(left + pw, 2) + "\" y=\"" + fixed(top + ph + 18, 2) + "\" text-anchor=\"end\">" +
         last->to_string() + "</text>\n";
  svg += "<text x=\"16\" y=\"" + fixed(top + ph / 2, 2) + "\" transform=\"rotate(-90 16 " + fixed(top + ph / 2, 2) +
         ")\" text-anchor=\"middle\">cumulative return</text>\n";

  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const char* color = palette[k % std::size(palette)];
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.curve.values.size(); ++i) {
      if (i) svg += ' ';
      svg += fixed(sx(day_number(c.curve.dates[i])), 2) + "," + fixed(sy(c.curve.values[i] - 1.0), 2);
    }
    svg += "\"/>\n";
    const double ly = top + 8 + 16 * static_cast<double>(k);
    svg += "<line x1=\"" + fixed(left + 10, 2) + "\" y1=\"" + fixed(ly, 2) + "\" x2=\"" + fixed(left + 30, 2) +
           "\" y2=\"" + fixed(ly, 2) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fixed(left + 36, 2) + "\" y=\"" + fixed(ly + 4, 2) + "\">" + escape(c.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void write_overlay_svg(std::span<const NamedCurve> curves, std::string_view title, const std::filesystem::path& path) {
  write_file_atomic(path, render_overlay_svg(curves, title));
}

}  // namespace finharness
