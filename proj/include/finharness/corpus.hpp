#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "finharness/common.hpp"

namespace finharness {

enum class TaskId { Classification, Summarization, Trading };
enum class Split { Train, Validation, Test };

std::string_view to_string(TaskId task) noexcept;
std::string_view to_string(Split split) noexcept;

/// Accepts the canonical lowercase names plus the aliases task1/task2/task3.
std::optional<TaskId> parse_task_id(std::string_view name);
std::optional<Split> parse_split(std::string_view name);

/// One instruction/input/gold record. For classification, gold and choices are
/// stored lowercase; for trading, gold is usually empty.
struct TaskExample {
  TaskId task = TaskId::Classification;
  std::string example_id;
  std::string instruction;
  std::string input;
  std::string gold;
  std::vector<std::string> choices;

  friend bool operator==(const TaskExample&, const TaskExample&) = default;
  friend auto operator<=>(const TaskExample&, const TaskExample&) = default;
};

struct TaskDataset {
  TaskId task = TaskId::Classification;
  Split split = Split::Train;
  std::vector<TaskExample> examples;
};

struct RecordIssue {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

class MalformedRecordError : public Error {
 public:
  explicit MalformedRecordError(std::vector<RecordIssue> issues);
  const std::vector<RecordIssue>& issues() const noexcept { return issues_; }
  std::size_t line() const noexcept { return issues_.front().line; }
  const std::string& reason() const noexcept { return issues_.front().reason; }

 private:
  std::vector<RecordIssue> issues_;
};

class DuplicateExampleIdError : public Error {
 public:
  explicit DuplicateExampleIdError(std::string id)
      : Error("duplicate example_id: " + id), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class MixedSplitError : public Error {
 public:
  using Error::Error;
};

/// Exact rational in (0, 1). Kept rational so ceil(n * fraction) has no
/// floating-point rounding surprises.
class Fraction {
 public:
  Fraction(std::uint64_t numerator, std::uint64_t denominator);

  /// Parses "0.8", "4/5" or "80:20" (the latter meaning 80 / (80 + 20)).
  static Fraction parse(std::string_view text);

  std::uint64_t numerator() const noexcept { return num_; }
  std::uint64_t denominator() const noexcept { return den_; }
  double value() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::size_t ceil_times(std::size_t n) const noexcept;
  std::string to_string() const;

 private:
  std::uint64_t num_;
  std::uint64_t den_;
};

struct SplitSpec {
  Fraction train_fraction{4, 5};
  std::uint64_t seed = 0;
};

struct FusedExample {
  TaskExample example;
  TaskId origin = TaskId::Classification;

  friend bool operator==(const FusedExample&, const FusedExample&) = default;
  friend auto operator<=>(const FusedExample&, const FusedExample&) = default;
};

struct FusionManifest {
  std::uint64_t seed = 0;
  std::map<TaskId, std::size_t> counts;
  std::size_t total = 0;
  std::string strategy = "shuffled_union";
  std::string created_at;
};

struct FusedDataset {
  std::vector<FusedExample> examples;
  FusionManifest manifest;
};

/// Parses one JSON line into an example. Throws MalformedRecordError (line 0)
/// with the reason on any schema violation.
TaskExample parse_example(std::string_view line, TaskId task);

/// Strict: any malformed line rejects the whole file.
TaskDataset load_dataset(const std::filesystem::path& path, TaskId task, Split split);

struct LenientLoad {
  TaskDataset dataset;
  std::vector<RecordIssue> skipped;
};

/// Skips malformed lines and reports them; duplicates still throw.
LenientLoad load_dataset_lenient(const std::filesystem::path& path, TaskId task, Split split);

/// Serializes examples in the same JSON-lines schema load_dataset accepts.
std::string serialize_dataset(const TaskDataset& ds);

std::pair<TaskDataset, TaskDataset> split_train_val(const TaskDataset& ds, const SplitSpec& spec);

/// Shuffled union of training corpora. Trading data is rejected.
FusedDataset fuse(std::span<const TaskDataset> datasets, std::uint64_t seed);

/// The exact bytes of the instruction corpus file.
std::string serialize_instruction_corpus(const FusedDataset& fd);

struct ExportedCorpus {
  std::filesystem::path corpus_path;
  std::filesystem::path manifest_path;
  std::string corpus_sha256;
};

/// Writes `path` and `<stem>.manifest.json` next to it.
ExportedCorpus export_instruction_corpus(const FusedDataset& fd, const std::filesystem::path& path);

std::filesystem::path manifest_path_for(const std::filesystem::path& corpus_path);

std::vector<FusedExample> load_instruction_corpus(const std::filesystem::path& path);

}  // namespace finharness
