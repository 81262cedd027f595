#include "finharness/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "finharness/backtest.hpp"
#include "finharness/corpus.hpp"
#include "finharness/embedding.hpp"
#include "finharness/llm_client.hpp"
#include "finharness/manifest.hpp"
#include "finharness/metrics_cls.hpp"
#include "finharness/metrics_sum.hpp"
#include "finharness/parse.hpp"
#include "finharness/prompts.hpp"

namespace finharness {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

class ValidationError : public Error {
 public:
  using Error::Error;
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ValidationError(what + " path is required");
  if (!fs::is_regular_file(path)) throw ValidationError(what + " not found: " + path);
}

TaskId require_task(const std::string& name) {
  auto t = parse_task_id(name);
  if (!t) throw ValidationError("unknown task '" + name + "'");
  return *t;
}

Fraction require_fraction(const std::string& text) {
  try {
    return Fraction::parse(text);
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
}

/// "label=path" -> {label, path}; a bare path gets an empty label.
std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) return {{}, s};
  return {s.substr(0, eq), s.substr(eq + 1)};
}

std::string task_name(TaskId t) { return std::string(to_string(t)); }

std::string dump_line(const ordered_json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// split

struct SplitArgs {
  std::string dataset;
  std::string task = "classification";
  std::string train_fraction = "0.8";
  std::uint64_t seed = 0;
  std::string out_dir = "run";
  bool lenient = false;
};

TaskDataset load_for_cli(const std::string& path, TaskId task, Split split, bool lenient, RunManifest& manifest) {
  if (!lenient) return load_dataset(path, task, split);
  auto loaded = load_dataset_lenient(path, task, split);
  if (!loaded.skipped.empty()) {
    auto arr = ordered_json::array();
    for (const auto& s : loaded.skipped) arr.push_back({{"line", s.line}, {"reason", s.reason}});
    manifest.set_note("skipped_lines:" + path, arr);
  }
  return std::move(loaded.dataset);
}

int cmd_split(const SplitArgs& a, std::ostream& out) {
  require_file(a.dataset, "dataset");
  const TaskId task = require_task(a.task);
  const Fraction fraction = require_fraction(a.train_fraction);

  RunManifest manifest("split", {{"dataset", a.dataset},
                                 {"task", a.task},
                                 {"train_fraction", fraction.to_string()},
                                 {"seed", a.seed},
                                 {"out_dir", a.out_dir},
                                 {"lenient", a.lenient}});
  manifest.add_input(a.dataset);
  const auto ds = load_for_cli(a.dataset, task, Split::Train, a.lenient, manifest);
  const auto [train, val] = split_train_val(ds, {fraction, a.seed});

  const fs::path dir(a.out_dir);
  const auto train_path = dir / (task_name(task) + ".train.jsonl");
  const auto val_path = dir / (task_name(task) + ".val.jsonl");
  write_file_atomic(train_path, serialize_dataset(train));
  write_file_atomic(val_path, serialize_dataset(val));
  manifest.add_output(train_path);
  manifest.add_output(val_path);
  manifest.set_count("input", ds.examples.size());
  manifest.set_count("train", train.examples.size());
  manifest.set_count("validation", val.examples.size());
  manifest.write(dir / ("manifest.split_" + task_name(task) + ".json"), kExitOk);
  out << "split " << task_name(task) << ": " << train.examples.size() << " train / " << val.examples.size()
      << " validation\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fuse

struct FuseArgs {
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  std::string train_fraction;  // empty: fuse the inputs whole
  std::string out_dir = "run";
  std::string corpus_name = "fused_corpus.jsonl";
  bool lenient = false;
};

int cmd_fuse(const FuseArgs& a, std::ostream& out) {
  if (a.inputs.empty()) throw ValidationError("fuse needs at least one --input task=path");
  std::vector<std::pair<TaskId, std::string>> inputs;
  for (const auto& spec : a.inputs) {
    auto [label, path] = split_assignment(spec);
    if (label.empty()) throw ValidationError("--input must look like task=path, got '" + spec + "'");
    const TaskId task = require_task(label);
    if (task == TaskId::Trading) throw ValidationError("trading data is excluded from fusion");
    require_file(path, label + " dataset");
    inputs.emplace_back(task, path);
  }
  std::optional<Fraction> fraction;
  if (!a.train_fraction.empty()) fraction = require_fraction(a.train_fraction);

  ordered_json inputs_json = ordered_json::array();
  for (const auto& [t, p] : inputs) inputs_json.push_back({{"task", task_name(t)}, {"path", p}});
  RunManifest manifest("fuse", {{"inputs", inputs_json},
                                {"seed", a.seed},
                                {"train_fraction", fraction ? ordered_json(fraction->to_string()) : ordered_json()},
                                {"out_dir", a.out_dir},
                                {"corpus_name", a.corpus_name},
                                {"fusion_strategy", "shuffled_union"},
                                {"lenient", a.lenient}});

  const fs::path dir(a.out_dir);
  std::vector<TaskDataset> train_parts;
  std::vector<std::pair<fs::path, std::string>> holdouts;
  for (const auto& [task, path] : inputs) {
    manifest.add_input(path);
    auto ds = load_for_cli(path, task, Split::Train, a.lenient, manifest);
    if (fraction) {
      auto [train, val] = split_train_val(ds, {*fraction, a.seed});
      manifest.set_count(task_name(task) + "_holdout", val.examples.size());
      holdouts.emplace_back(dir / (task_name(task) + ".val.jsonl"), serialize_dataset(val));
      ds = std::move(train);
    }
    train_parts.push_back(std::move(ds));
  }

  const FusedDataset fd = fuse(train_parts, a.seed);
  for (const auto& [p, body] : holdouts) {
    write_file_atomic(p, body);
    manifest.add_output(p);
  }
  const auto exported = export_instruction_corpus(fd, dir / a.corpus_name);
  manifest.add_output(exported.corpus_path);
  manifest.add_output(exported.manifest_path);
  for (const auto& [task, n] : fd.manifest.counts) manifest.set_count(task_name(task), n);
  manifest.set_count("total", fd.manifest.total);
  manifest.set_note("corpus_sha256", exported.corpus_sha256);
  manifest.write(dir / "manifest.fuse.json", kExitOk);

  out << "fused " << fd.manifest.total << " examples -> " << exported.corpus_path.string() << " (sha256 "
      << exported.corpus_sha256.substr(0, 12) << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// infer

struct InferArgs {
  std::string task;
  std::string dataset;
  std::string split = "test";
  std::string templates;
  std::string base_url;
  std::string model;
  std::string api_key_env = "FINHARNESS_API_KEY";
  std::string cache;
  std::string out_dir = "run";
  double temperature = 0.0;
  int max_tokens = 256;
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  std::int64_t backoff_ms = 250;
  double backoff_multiplier = 2.0;
  int timeout_s = 120;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const TaskId task = require_task(a.task);
  require_file(a.dataset, "dataset");
  if (!a.templates.empty()) require_file(a.templates, "template file");
  const auto split = parse_split(a.split);
  if (!split) throw ValidationError("unknown split '" + a.split + "'");
  if (a.model.empty()) throw ValidationError("--model is required");
  if (a.max_in_flight < 1) throw ValidationError("--max-in-flight must be >= 1");
  RetryPolicy policy;
  policy.max_attempts = a.max_attempts;
  policy.base_backoff_ms = a.backoff_ms;
  policy.backoff_multiplier = a.backoff_multiplier;
  try {
    policy.validate();
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }

  const fs::path dir(a.out_dir);
  const fs::path cache_path = a.cache.empty() ? dir / "completion_cache.jsonl" : fs::path(a.cache);
  const fs::path out_path = dir / ("raw_" + task_name(task) + ".jsonl");

  RunManifest manifest("infer", {{"task", task_name(task)},
                                 {"dataset", a.dataset},
                                 {"split", a.split},
                                 {"templates", a.templates.empty() ? ordered_json("builtin") : ordered_json(a.templates)},
                                 {"base_url", a.base_url},
                                 {"model", a.model},
                                 {"api_key_env", a.api_key_env},
                                 {"temperature", a.temperature},
                                 {"max_tokens", a.max_tokens},
                                 {"max_in_flight", a.max_in_flight},
                                 {"retry", {{"max_attempts", policy.max_attempts},
                                            {"base_backoff_ms", policy.base_backoff_ms},
                                            {"backoff_multiplier", policy.backoff_multiplier}}},
                                 {"cache", cache_path.string()},
                                 {"out_dir", a.out_dir}});
  manifest.add_input(a.dataset);
  if (!a.templates.empty()) manifest.add_input(a.templates);

  const auto ds = load_dataset(a.dataset, task, *split);
  const auto templates = a.templates.empty() ? default_templates() : load_templates(a.templates);
  const auto& tmpl = templates.at(task);

  std::vector<CompletionRequest> requests;
  requests.reserve(ds.examples.size());
  for (const auto& e : ds.examples) requests.push_back(make_request(render(tmpl, e), a.model, a.temperature, a.max_tokens));

  std::shared_ptr<Transport> transport;
  if (!a.base_url.empty()) {
    HttpTransport::Options opts;
    opts.base_url = a.base_url;
    opts.bearer_token = api_key_from_env(a.api_key_env);
    opts.read_timeout = std::chrono::seconds(a.timeout_s);
    transport = std::make_shared<HttpTransport>(opts);
  }
  auto cache = std::make_shared<RecordCache>(cache_path);
  ChatClient client(transport, cache);
  const auto results = client.complete_batch(requests, policy, a.max_in_flight);

  std::string body;
  std::size_t errors = 0, from_cache = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    ordered_json rec;
    rec["example_id"] = ds.examples[i].example_id;
    rec["prompt_fingerprint"] = fingerprint(requests[i]);
    if (results[i].ok()) {
      rec["raw_text"] = results[i].result->text;
      rec["from_cache"] = results[i].result->from_cache;
      from_cache += results[i].result->from_cache ? 1 : 0;
    } else {
      rec["raw_text"] = nullptr;
      rec["from_cache"] = false;
      rec["error"] = results[i].error;
      ++errors;
    }
    body += rec.dump();
    body += '\n';
  }
  write_file_atomic(out_path, body);
  manifest.add_output(out_path);

  const auto stats = client.stats();
  manifest.set_count("examples", ds.examples.size());
  manifest.set_count("from_cache", from_cache);
  manifest.set_count("cache_hits", stats.cache_hits);
  manifest.set_count("network_calls", stats.network_attempts);
  manifest.set_count("errors", errors);
  const int code = errors ? kExitPartial : kExitOk;
  manifest.write(dir / ("manifest.infer_" + task_name(task) + ".json"), code);

  out << "infer " << task_name(task) << ": " << ds.examples.size() << " examples, " << from_cache << " cached, "
      << stats.network_attempts << " network calls, " << errors << " errors -> " << out_path.string() << "\n";
  return code;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string task;
  std::string dataset;
  std::string split = "test";
  std::string predictions;
  std::string out_dir = "run";
  std::string positive_class;
  std::string embedding_table;
  std::string embedding_url;
  std::string embedding_model = "embedding";
  std::string embedding_cache;
  std::string api_key_env = "FINHARNESS_API_KEY";
  std::size_t embedding_dim = 64;
  bool bertscore_idf = false;
  std::string bertscore_baseline;
  bool serial = false;
};

struct PredictionRecord {
  std::string example_id;
  std::optional<std::string> raw_text;
};

std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::vector<PredictionRecord> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  const std::string text = read_file(path);
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = path + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error&) {
      throw ValidationError(where + ": invalid JSON");
    }
    if (!rec.is_object() || !rec.contains("example_id") || !rec["example_id"].is_string()) {
      throw ValidationError(where + ": missing example_id");
    }
    PredictionRecord p{rec["example_id"].get<std::string>(), std::nullopt};
    if (!seen.insert(p.example_id).second) throw ValidationError(where + ": duplicate example_id " + p.example_id);
    if (auto it = rec.find("raw_text"); it != rec.end() && it->is_string()) p.raw_text = it->get<std::string>();
    out.push_back(std::move(p));
  }
  return out;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const TaskId task = require_task(a.task);
  if (task == TaskId::Trading) throw ValidationError("trading outputs are scored with the backtest command");
  require_file(a.dataset, "dataset");
  require_file(a.predictions, "predictions");
  const auto split = parse_split(a.split);
  if (!split) throw ValidationError("unknown split '" + a.split + "'");
  if (!a.embedding_table.empty()) require_file(a.embedding_table, "embedding table");
  std::optional<double> baseline;
  if (!a.bertscore_baseline.empty()) {
    double v = 0;
    const auto& s = a.bertscore_baseline;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !(v < 1.0)) {
      throw ValidationError("--bertscore-baseline must be a number below 1");
    }
    baseline = v;
  }

  const fs::path dir(a.out_dir);
  const fs::path out_path = dir / ("eval_" + task_name(task) + ".json");
  RunManifest manifest("eval", {{"task", task_name(task)},
                                {"dataset", a.dataset},
                                {"predictions", a.predictions},
                                {"positive_class", a.positive_class},
                                {"embedding_table", a.embedding_table},
                                {"embedding_url", a.embedding_url},
                                {"embedding_model", a.embedding_model},
                                {"embedding_dim", a.embedding_dim},
                                {"bertscore_idf", a.bertscore_idf},
                                {"bertscore_baseline", baseline ? ordered_json(*baseline) : ordered_json()},
                                {"execution", a.serial ? "serial" : "parallel"},
                                {"out_dir", a.out_dir}});
  manifest.add_input(a.dataset);
  manifest.add_input(a.predictions);

  const auto ds = load_dataset(a.dataset, task, *split);
  std::map<std::string, const TaskExample*> by_id;
  for (const auto& e : ds.examples) by_id.emplace(e.example_id, &e);
  const auto preds = load_predictions(a.predictions);

  std::vector<const TaskExample*> gold;
  for (const auto& p : preds) {
    auto it = by_id.find(p.example_id);
    if (it == by_id.end()) throw ValidationError("prediction for unknown example_id " + p.example_id);
    gold.push_back(it->second);
  }
  const std::size_t missing = ds.examples.size() - preds.size();

  ordered_json report;
  auto failed_ids = ordered_json::array();
  if (task == TaskId::Classification) {
    std::vector<std::string> classes;
    for (const auto& e : ds.examples) {
      for (const auto& c : e.choices) {
        if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
      }
    }
    std::vector<std::string> gold_labels;
    std::vector<ParseOutcome<Label>> parsed;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      gold_labels.push_back(gold[i]->gold);
      if (preds[i].raw_text) {
        parsed.push_back(parse_label(*preds[i].raw_text, gold[i]->choices));
      } else {
        parsed.push_back(ParseOutcome<Label>::failed(ParseFailure::NoLabelFound, ""));
      }
      if (!parsed.back().ok()) failed_ids.push_back(preds[i].example_id);
    }
    const auto cm = confusion(gold_labels, parsed, classes);
    const std::string positive = a.positive_class.empty() ? (classes.empty() ? "" : classes.front()) : a.positive_class;
    if (std::find(classes.begin(), classes.end(), positive) == classes.end()) {
      throw ValidationError("positive class '" + positive + "' is not one of the dataset's choices");
    }
    report = to_json(classification_report(cm, positive));
    manifest.set_count("parse_failures", cm.total_failures());
  } else {
    std::vector<std::optional<std::string>> candidates;
    std::vector<std::string> references;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      references.push_back(gold[i]->gold);
      candidates.push_back(preds[i].raw_text ? try_extract_summary(*preds[i].raw_text) : std::nullopt);
      if (!candidates.back()) failed_ids.push_back(preds[i].example_id);
    }
    std::unique_ptr<EmbeddingProvider> provider;
    if (!a.embedding_url.empty()) {
      HttpTransport::Options opts;
      opts.base_url = a.embedding_url;
      opts.bearer_token = api_key_from_env(a.api_key_env);
      provider = std::make_unique<HttpEmbeddingProvider>(std::make_shared<HttpTransport>(opts), a.embedding_model,
                                                         RetryPolicy{});
    } else if (!a.embedding_table.empty()) {
      manifest.add_input(a.embedding_table);
      provider = std::make_unique<LookupEmbeddingProvider>(LookupEmbeddingProvider::from_file(a.embedding_table));
    } else {
      provider = std::make_unique<LookupEmbeddingProvider>(a.embedding_dim);
    }
    std::shared_ptr<RecordCache> emb_cache;
    if (!a.embedding_cache.empty()) emb_cache = std::make_shared<RecordCache>(fs::path(a.embedding_cache));
    Embedder embedder(*provider, emb_cache);
    SummEvalOptions opts;
    opts.bertscore_idf = a.bertscore_idf;
    opts.bertscore_baseline = baseline;
    opts.execution = a.serial ? Execution::Serial : Execution::Parallel;
    const auto r = evaluate_summaries(candidates, references, embedder, opts);
    report = to_json(r);
    manifest.set_count("empty_candidates", r.n_empty_candidates);
  }
  report["n_missing_predictions"] = missing;
  write_file_atomic(out_path, dump_line(report));
  manifest.add_output(out_path);
  manifest.set_count("predictions", preds.size());
  manifest.set_count("missing_predictions", missing);
  manifest.set_note("parse_failed_example_ids", failed_ids);
  manifest.write(dir / ("manifest.eval_" + task_name(task) + ".json"), kExitOk);

  out << "eval " << task_name(task) << ": " << preds.size() << " items -> " << out_path.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// backtest

struct BacktestArgs {
  std::string prices;
  std::string ticker;
  std::vector<std::string> actions;
  std::string out_dir = "run";
  std::string cr_mode = "arithmetic_sum";
  double periods_per_year = 252.0;
  double risk_free_daily = 0.0;
  bool long_only = false;
  bool serial = false;
};

int cmd_backtest(const BacktestArgs& a, std::ostream& out) {
  require_file(a.prices, "price file");
  if (a.ticker.empty()) throw ValidationError("--ticker is required");
  if (a.actions.empty()) throw ValidationError("backtest needs at least one --actions [label=]path");
  std::vector<std::pair<std::string, std::string>> action_files;
  std::set<std::string> labels;
  for (const auto& spec : a.actions) {
    auto [label, path] = split_assignment(spec);
    require_file(path, "actions file");
    if (label.empty()) label = fs::path(path).stem().string();
    if (!labels.insert(label).second) throw ValidationError("duplicate actions label '" + label + "'");
    action_files.emplace_back(label, path);
  }
  const auto mode = parse_cumulative_mode(a.cr_mode);
  if (!mode) throw ValidationError("unknown --cr-mode '" + a.cr_mode + "'");
  if (!(a.periods_per_year > 0)) throw ValidationError("--periods-per-year must be positive");

  BacktestOptions opts;
  opts.cr_mode = *mode;
  opts.periods_per_year = a.periods_per_year;
  opts.risk_free_daily = a.risk_free_daily;
  opts.long_only = a.long_only;

  ordered_json actions_json = ordered_json::array();
  for (const auto& [l, p] : action_files) actions_json.push_back({{"label", l}, {"path", p}});
  RunManifest manifest("backtest", {{"prices", a.prices},
                                    {"ticker", a.ticker},
                                    {"actions", actions_json},
                                    {"cr_mode", to_string(*mode)},
                                    {"periods_per_year", a.periods_per_year},
                                    {"risk_free_daily", a.risk_free_daily},
                                    {"long_only", a.long_only},
                                    {"execution", a.serial ? "serial" : "parallel"},
                                    {"out_dir", a.out_dir}});
  manifest.add_input(a.prices);

  const auto prices = load_prices_csv(a.prices, a.ticker);
  std::vector<ActionSeries> series;
  series.reserve(action_files.size());
  for (const auto& [label, path] : action_files) {
    manifest.add_input(path);
    series.push_back(load_actions(path));
  }
  std::vector<BacktestJob> jobs;
  for (std::size_t i = 0; i < series.size(); ++i) jobs.push_back({&prices, &series[i], action_files[i].first});
  const auto outcomes = kernels::backtest_batch(jobs, opts, a.serial ? Execution::Serial : Execution::Parallel);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].report) throw Error(action_files[i].first + ": " + outcomes[i].error);
  }

  const fs::path dir(a.out_dir);
  std::vector<NamedCurve> curves;
  for (const auto& o : outcomes) {
    const auto& rep = *o.report;
    const auto stem = a.ticker + "_" + rep.label;
    const auto report_path = dir / ("backtest_" + stem + ".json");
    const auto curve_path = dir / ("curve_" + stem + ".csv");
    write_file_atomic(report_path, dump_line(to_json(rep)));
    write_curve_csv(rep.equity, curve_path);
    manifest.add_output(report_path);
    manifest.add_output(curve_path);
    manifest.set_count("hold_fallbacks:" + rep.label, rep.n_hold_fallbacks);
    curves.push_back({rep.label, rep.equity});
    out << a.ticker << " " << rep.label << ": CR " << rep.cr << "  SR "
        << (rep.sr ? std::to_string(*rep.sr) : rep.sr_status) << "  SD " << rep.sd << "  AV " << rep.av << "  MD "
        << rep.md << "\n";
  }
  const auto svg_path = dir / ("curves_" + a.ticker + ".svg");
  write_overlay_svg(curves, "Cumulative return: " + a.ticker, svg_path);
  manifest.add_output(svg_path);
  manifest.set_count("days", prices.size() - 1);
  manifest.write(dir / ("manifest.backtest_" + a.ticker + ".json"), kExitOk);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string run_dir = "run";
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  if (!fs::is_directory(a.run_dir)) throw ValidationError("run directory not found: " + a.run_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.run_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && entry.path().extension() == ".json" &&
        (name.starts_with("eval_") || name.starts_with("backtest_"))) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no eval_*.json or backtest_*.json reports in " + a.run_dir);

  RunManifest manifest("report", {{"run_dir", a.run_dir}});
  ordered_json summary;
  summary["evaluations"] = ordered_json::array();
  summary["backtests"] = ordered_json::array();
  for (const auto& f : files) {
    manifest.add_input(f);
    auto j = ordered_json::parse(read_file(f));
    j["source"] = f.filename().string();
    const bool is_eval = f.filename().string().starts_with("eval_");
    if (is_eval) {
      if (j.value("task", "") == "classification") {
        out << "classification  ACC " << j["accuracy"].get<double>() << "  F1(macro) " << j["f1_macro"].get<double>()
            << "  F1(" << j["f1_binary"]["positive_class"].get<std::string>() << ") "
            << j["f1_binary"]["value"].get<double>() << "  MCC " << j["mcc"].get<double>() << "  parse failures "
            << j["n_parse_failures"].get<std::size_t>() << "\n";
      } else {
        out << "summarization   Rouge-1 " << j["rouge1"]["f1"].get<double>() << "  Rouge-2 "
            << j["rouge2"]["f1"].get<double>() << "  Rouge-L " << j["rougeL"]["f1"].get<double>() << "  BertScore "
            << j["bertscore"]["f1"].get<double>() << "\n";
      }
      summary["evaluations"].push_back(j);
    } else {
      out << "trading " << j["ticker"].get<std::string>() << "/" << j["label"].get<std::string>() << "  CR "
          << j["CR"].get<double>() << "  SR " << (j["SR"].is_null() ? std::string("n/a") : j["SR"].dump()) << "  SD "
          << j["SD"].get<double>() << "  AV " << j["AV"].get<double>() << "  MD " << j["MD"].get<double>() << "\n";
      summary["backtests"].push_back(j);
    }
  }
  const fs::path summary_path = fs::path(a.run_dir) / "summary.json";
  write_file_atomic(summary_path, dump_line(summary));
  manifest.add_output(summary_path);
  manifest.set_count("reports", files.size());
  manifest.write(fs::path(a.run_dir) / "manifest.report.json", kExitOk);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Financial LLM evaluation harness: fuse corpora, run a chat model, score outputs, backtest decisions"};
  app.name("finharness");
  app.set_config("--config", "", "TOML/INI file; [split]/[fuse]/... sections hold subcommand options");
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Shuffle one training set and cut it into train/validation parts");
  split->add_option("--dataset", split_args.dataset, "Training set, JSON lines")->required();
  split->add_option("--task", split_args.task, "classification | summarization | trading");
  split->add_option("--train-fraction", split_args.train_fraction, "e.g. 0.8, 4/5 or 80:20");
  split->add_option("--seed", split_args.seed);
  split->add_option("--out-dir", split_args.out_dir);
  split->add_flag("--lenient", split_args.lenient, "Skip malformed lines instead of failing");

  FuseArgs fuse_args;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse classification and summarization training sets into one corpus");
  fuse_cmd->add_option("--input", fuse_args.inputs, "task=path, repeatable")->required();
  fuse_cmd->add_option("--seed", fuse_args.seed);
  fuse_cmd->add_option("--train-fraction", fuse_args.train_fraction,
                       "Split each input first and hold out the remainder");
  fuse_cmd->add_option("--out-dir", fuse_args.out_dir);
  fuse_cmd->add_option("--corpus-name", fuse_args.corpus_name);
  fuse_cmd->add_flag("--lenient", fuse_args.lenient);

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "Render prompts and collect raw completions from a chat endpoint");
  infer->add_option("--task", infer_args.task)->required();
  infer->add_option("--dataset", infer_args.dataset)->required();
  infer->add_option("--split", infer_args.split);
  infer->add_option("--templates", infer_args.templates, "JSON template file; built-in templates otherwise");
  infer->add_option("--base-url", infer_args.base_url, "e.g. http://localhost:8000");
  infer->add_option("--model", infer_args.model)->required();
  infer->add_option("--api-key-env", infer_args.api_key_env);
  infer->add_option("--cache", infer_args.cache, "Completion cache file (default <out-dir>/completion_cache.jsonl)");
  infer->add_option("--out-dir", infer_args.out_dir);
  infer->add_option("--temperature", infer_args.temperature);
  infer->add_option("--max-tokens", infer_args.max_tokens);
  infer->add_option("--max-in-flight", infer_args.max_in_flight);
  infer->add_option("--max-attempts", infer_args.max_attempts);
  infer->add_option("--backoff-ms", infer_args.backoff_ms);
  infer->add_option("--backoff-multiplier", infer_args.backoff_multiplier);
  infer->add_option("--timeout", infer_args.timeout_s, "Read timeout in seconds");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Parse raw completions and score them against gold answers");
  eval->add_option("--task", eval_args.task)->required();
  eval->add_option("--dataset", eval_args.dataset)->required();
  eval->add_option("--split", eval_args.split);
  eval->add_option("--predictions", eval_args.predictions, "raw_<task>.jsonl from infer")->required();
  eval->add_option("--out-dir", eval_args.out_dir);
  eval->add_option("--positive-class", eval_args.positive_class, "Class for binary F1 (default: first choice)");
  eval->add_option("--embedding-table", eval_args.embedding_table, "token v1 .. vd text file");
  eval->add_option("--embedding-url", eval_args.embedding_url, "Embedding endpoint base URL");
  eval->add_option("--embedding-model", eval_args.embedding_model);
  eval->add_option("--embedding-cache", eval_args.embedding_cache);
  eval->add_option("--embedding-dim", eval_args.embedding_dim, "Dimension of the hashed fallback provider");
  eval->add_option("--api-key-env", eval_args.api_key_env);
  eval->add_flag("--bertscore-idf", eval_args.bertscore_idf);
  eval->add_option("--bertscore-baseline", eval_args.bertscore_baseline);
  eval->add_flag("--serial", eval_args.serial, "Use the serial reference kernels");

  BacktestArgs bt_args;
  auto* bt = app.add_subcommand("backtest", "Simulate daily decisions against a price series");
  bt->add_option("--prices", bt_args.prices, "CSV with date,close")->required();
  bt->add_option("--ticker", bt_args.ticker)->required();
  bt->add_option("--actions", bt_args.actions, "[label=]path to a date,action CSV or raw_trading.jsonl; repeatable")
      ->required();
  bt->add_option("--out-dir", bt_args.out_dir);
  bt->add_option("--cr-mode", bt_args.cr_mode, "arithmetic_sum | compounded");
  bt->add_option("--periods-per-year", bt_args.periods_per_year);
  bt->add_option("--risk-free-daily", bt_args.risk_free_daily);
  bt->add_flag("--long-only", bt_args.long_only, "Sell means flat, never short");
  bt->add_flag("--serial", bt_args.serial, "Use the serial reference kernel");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Summarize eval and backtest reports in a run directory");
  report->add_option("--run-dir", report_args.run_dir);

  std::vector<const char*> argv{"finharness"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInvalid;
  }

  try {
    if (*split) return cmd_split(split_args, out);
    if (*fuse_cmd) return cmd_fuse(fuse_args, out);
    if (*infer) return cmd_infer(infer_args, out);
    if (*eval) return cmd_eval(eval_args, out);
    if (*bt) return cmd_backtest(bt_args, out);
    if (*report) return cmd_report(report_args, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace finharness
