#include "finharness/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

namespace finharness {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(TaskId task) noexcept {
  switch (task) {
    case TaskId::Classification: return "classification";
    case TaskId::Summarization: return "summarization";
    case TaskId::Trading: return "trading";
  }
  return "unknown";
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "unknown";
}

std::optional<TaskId> parse_task_id(std::string_view name) {
  const auto n = to_lower_ascii(name);
  if (n == "classification" || n == "task1") return TaskId::Classification;
  if (n == "summarization" || n == "task2") return TaskId::Summarization;
  if (n == "trading" || n == "task3") return TaskId::Trading;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view name) {
  const auto n = to_lower_ascii(name);
  if (n == "train") return Split::Train;
  if (n == "validation" || n == "val") return Split::Validation;
  if (n == "test") return Split::Test;
  return std::nullopt;
}

MalformedRecordError::MalformedRecordError(std::vector<RecordIssue> issues)
    : Error([&] {
        std::string msg = "malformed record";
        if (!issues.empty()) {
          msg += " at line " + std::to_string(issues.front().line) + ": " + issues.front().reason;
          if (issues.size() > 1) msg += " (+" + std::to_string(issues.size() - 1) + " more)";
        }
        return msg;
      }()),
      issues_(std::move(issues)) {
  if (issues_.empty()) issues_.push_back({0, "unspecified"});
}

// ---------------------------------------------------------------------------
// Fraction

Fraction::Fraction(std::uint64_t numerator, std::uint64_t denominator) : num_(numerator), den_(denominator) {
  if (den_ == 0 || num_ == 0 || num_ >= den_) {
    throw Error("fraction must lie strictly between 0 and 1: " + std::to_string(numerator) + "/" +
                std::to_string(denominator));
  }
  const auto g = std::gcd(num_, den_);
  num_ /= g;
  den_ /= g;
}

namespace {

std::uint64_t parse_u64(std::string_view s, std::string_view whole) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error("invalid fraction: " + std::string(whole));
  }
  return v;
}

}  // namespace

Fraction Fraction::parse(std::string_view text) {
  const auto t = trim(text);
  if (auto colon = t.find(':'); colon != std::string_view::npos) {
    const auto a = parse_u64(t.substr(0, colon), t);
    const auto b = parse_u64(t.substr(colon + 1), t);
    return Fraction(a, a + b);
  }
  if (auto slash = t.find('/'); slash != std::string_view::npos) {
    return Fraction(parse_u64(t.substr(0, slash), t), parse_u64(t.substr(slash + 1), t));
  }
  if (auto dot = t.find('.'); dot != std::string_view::npos) {
    const auto int_part = t.substr(0, dot);
    const auto frac_part = t.substr(dot + 1);
    if ((!int_part.empty() && parse_u64(int_part, t) != 0) || frac_part.empty() || frac_part.size() > 18) {
      throw Error("invalid fraction: " + std::string(text));
    }
    std::uint64_t den = 1;
    for (std::size_t i = 0; i < frac_part.size(); ++i) den *= 10;
    return Fraction(parse_u64(frac_part, t), den);
  }
  throw Error("invalid fraction: " + std::string(text));
}

std::size_t Fraction::ceil_times(std::size_t n) const noexcept {
  const auto prod = static_cast<unsigned __int128>(n) * num_;
  return static_cast<std::size_t>((prod + den_ - 1) / den_);
}

std::string Fraction::to_string() const { return std::to_string(num_) + "/" + std::to_string(den_); }

// ---------------------------------------------------------------------------
// Ingestion

namespace {

[[noreturn]] void malformed(std::string reason) { throw MalformedRecordError({{0, std::move(reason)}}); }

const json* find_field(const json& obj, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    if (auto it = obj.find(name); it != obj.end()) return &*it;
  }
  return nullptr;
}

std::string require_string(const json& obj, std::initializer_list<const char*> names, const char* label) {
  const json* v = find_field(obj, names);
  if (!v || v->is_null()) malformed(std::string("missing ") + label);
  if (!v->is_string()) malformed(std::string(label) + " is not a string");
  return v->get<std::string>();
}

void check_unique(const std::vector<TaskExample>& examples) {
  std::unordered_set<std::string> seen;
  for (const auto& e : examples) {
    if (!seen.insert(e.example_id).second) throw DuplicateExampleIdError(e.example_id);
  }
}

}  // namespace

TaskExample parse_example(std::string_view line, TaskId task) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    malformed(std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) malformed("record is not a JSON object");

  if (const json* t = find_field(obj, {"task", "origin_task"}); t && !t->is_null()) {
    if (!t->is_string() || parse_task_id(t->get<std::string>()) != task) malformed("task mismatch");
  }

  TaskExample ex;
  ex.task = task;

  const json* id = find_field(obj, {"example_id", "id"});
  if (!id || id->is_null()) malformed("missing example_id");
  if (id->is_string()) {
    ex.example_id = id->get<std::string>();
  } else if (id->is_number_integer()) {
    ex.example_id = id->dump();
  } else {
    malformed("example_id is not a string");
  }
  if (ex.example_id.empty()) malformed("empty example_id");

  ex.instruction = require_string(obj, {"instruction"}, "instruction");
  ex.input = require_string(obj, {"input"}, "input");

  if (task == TaskId::Trading) {
    if (const json* g = find_field(obj, {"gold", "output"}); g && !g->is_null()) {
      if (!g->is_string()) malformed("gold is not a string");
      ex.gold = g->get<std::string>();
    }
  } else {
    ex.gold = require_string(obj, {"gold", "output"}, "gold");
  }

  if (const json* c = find_field(obj, {"choices"}); c && !c->is_null()) {
    if (!c->is_array()) malformed("choices is not an array");
    for (const auto& item : *c) {
      if (!item.is_string()) malformed("choice is not a string");
      ex.choices.push_back(item.get<std::string>());
    }
  }

  switch (task) {
    case TaskId::Classification: {
      for (auto& c : ex.choices) c = to_lower_ascii(trim(c));
      ex.gold = to_lower_ascii(trim(ex.gold));
      const std::set<std::string> distinct(ex.choices.begin(), ex.choices.end());
      if (distinct.size() < 2) malformed("classification needs at least 2 distinct choices");
      if (distinct.size() != ex.choices.size()) malformed("duplicate choices");
      if (!distinct.contains(ex.gold)) malformed("gold not among choices");
      break;
    }
    case TaskId::Summarization:
      if (trim(ex.gold).empty()) malformed("empty gold summary");
      break;
    case TaskId::Trading:
      break;
  }
  return ex;
}

namespace {

LenientLoad load_impl(const std::filesystem::path& path, TaskId task, Split split, bool lenient) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path);
  const std::string text = read_file(path);

  LenientLoad out;
  out.dataset.task = task;
  out.dataset.split = split;

  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      out.dataset.examples.push_back(parse_example(lines[i], task));
    } catch (const MalformedRecordError& e) {
      out.skipped.push_back({i + 1, e.reason()});
    }
  }
  if (!lenient && !out.skipped.empty()) throw MalformedRecordError(std::move(out.skipped));
  check_unique(out.dataset.examples);
  return out;
}

}  // namespace

TaskDataset load_dataset(const std::filesystem::path& path, TaskId task, Split split) {
  return load_impl(path, task, split, false).dataset;
}

LenientLoad load_dataset_lenient(const std::filesystem::path& path, TaskId task, Split split) {
  return load_impl(path, task, split, true);
}

std::string serialize_dataset(const TaskDataset& ds) {
  std::string out;
  for (const auto& e : ds.examples) {
    ordered_json j;
    j["example_id"] = e.example_id;
    j["task"] = to_string(e.task);
    j["instruction"] = e.instruction;
    j["input"] = e.input;
    j["gold"] = e.gold;
    if (!e.choices.empty()) j["choices"] = e.choices;
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split and fusion

std::pair<TaskDataset, TaskDataset> split_train_val(const TaskDataset& ds, const SplitSpec& spec) {
  if (ds.split != Split::Train) throw MixedSplitError("split_train_val expects a train split");
  if (ds.examples.size() < 2) {
    throw EmptyDatasetError("split_train_val needs at least 2 examples, got " + std::to_string(ds.examples.size()));
  }
  std::vector<std::size_t> order(ds.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  seeded_shuffle(order, spec.seed);

  const std::size_t n_train = spec.train_fraction.ceil_times(ds.examples.size());
  TaskDataset train{ds.task, Split::Train, {}};
  TaskDataset val{ds.task, Split::Validation, {}};
  train.examples.reserve(n_train);
  val.examples.reserve(ds.examples.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : val).examples.push_back(ds.examples[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

FusedDataset fuse(std::span<const TaskDataset> datasets, std::uint64_t seed) {
  if (datasets.empty()) throw EmptyDatasetError("fuse needs at least one dataset");

  FusedDataset fd;
  fd.manifest.seed = seed;
  std::set<std::pair<TaskId, std::string>> ids;
  for (const auto& ds : datasets) {
    if (ds.split != Split::Train) {
      throw MixedSplitError(std::string("fuse accepts only train splits; got ") + std::string(to_string(ds.split)) +
                            " for " + std::string(to_string(ds.task)));
    }
    if (ds.task == TaskId::Trading) throw Error("trading data is excluded from fusion");
    for (const auto& e : ds.examples) {
      if (!ids.emplace(e.task, e.example_id).second) throw DuplicateExampleIdError(e.example_id);
      fd.examples.push_back({e, ds.task});
    }
    fd.manifest.counts[ds.task] += ds.examples.size();
  }
  if (fd.examples.empty()) throw EmptyDatasetError("fuse inputs contain no examples");

  seeded_shuffle(fd.examples, seed);
  fd.manifest.total = fd.examples.size();
  fd.manifest.created_at = utc_timestamp();
  return fd;
}

std::string serialize_instruction_corpus(const FusedDataset& fd) {
  std::string out;
  for (const auto& fe : fd.examples) {
    ordered_json j;
    j["example_id"] = fe.example.example_id;
    j["instruction"] = fe.example.instruction;
    j["input"] = fe.example.input;
    j["output"] = fe.example.gold;
    j["origin_task"] = to_string(fe.origin);
    if (!fe.example.choices.empty()) j["choices"] = fe.example.choices;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& corpus_path) {
  auto p = corpus_path;
  p.replace_extension(".manifest.json");
  return p;
}

ExportedCorpus export_instruction_corpus(const FusedDataset& fd, const std::filesystem::path& path) {
  if (fd.examples.empty()) throw EmptyDatasetError("cannot export an empty corpus");
  const std::string body = serialize_instruction_corpus(fd);

  ExportedCorpus out{path, manifest_path_for(path), sha256_hex(body)};

  ordered_json m;
  m["seed"] = fd.manifest.seed;
  ordered_json counts = ordered_json::object();
  for (const auto& [task, n] : fd.manifest.counts) counts[std::string(to_string(task))] = n;
  m["counts"] = counts;
  m["total"] = fd.manifest.total;
  m["strategy"] = fd.manifest.strategy;
  m["created_at"] = fd.manifest.created_at;
  m["corpus_file"] = path.filename().string();
  m["corpus_sha256"] = out.corpus_sha256;

  write_file_atomic(path, body);
  write_file_atomic(out.manifest_path, m.dump(2) + "\n");
  return out;
}

std::vector<FusedExample> load_instruction_corpus(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<FusedExample> out;
  std::vector<RecordIssue> issues;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      json obj = json::parse(lines[i]);
      const auto origin = obj.is_object() && obj.contains("origin_task") && obj["origin_task"].is_string()
                              ? parse_task_id(obj["origin_task"].get<std::string>())
                              : std::nullopt;
      if (!origin) {
        issues.push_back({i + 1, "missing origin_task"});
        continue;
      }
      out.push_back({parse_example(lines[i], *origin), *origin});
    } catch (const MalformedRecordError& e) {
      issues.push_back({i + 1, e.reason()});
    } catch (const json::parse_error& e) {
      issues.push_back({i + 1, std::string("invalid JSON: ") + e.what()});
    }
  }
  if (!issues.empty()) throw MalformedRecordError(std::move(issues));
  return out;
}

}  // namespace finharness
