#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "finharness/common.hpp"
#include "finharness/parse.hpp"

namespace finharness {

class LengthMismatchError : public Error {
 public:
  using Error::Error;
};

class EmptyMatrixError : public Error {
 public:
  EmptyMatrixError() : Error("confusion matrix is empty") {}
};

/// counts[i][j] = items with gold class i predicted as class j.
/// Parse failures land in `failures[i]`, a pseudo-class column that is
/// wrong for every gold class and never counts as a prediction of a real class.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::size_t> failures;

  static ConfusionMatrix from_counts(std::vector<std::string> classes, std::vector<std::vector<std::size_t>> counts,
                                     std::vector<std::size_t> failures = {});

  std::size_t size() const noexcept { return classes.size(); }
  std::size_t total() const noexcept;
  std::size_t total_failures() const noexcept;
  std::size_t index_of(std::string_view cls) const;  // throws on unknown class
};

/// `classes` fixes row/column order; every gold label must be one of them.
/// A successful prediction outside `classes` is treated as a parse failure.
ConfusionMatrix confusion(std::span<const std::string> gold, std::span<const ParseOutcome<Label>> pred,
                          std::span<const std::string> classes);

struct F1Averaging {
  enum class Kind { Binary, Macro, Micro, Weighted };
  Kind kind = Kind::Macro;
  std::string positive;  // Binary only

  static F1Averaging binary(std::string positive_class) { return {Kind::Binary, std::move(positive_class)}; }
  static F1Averaging macro() { return {Kind::Macro, {}}; }
  static F1Averaging micro() { return {Kind::Micro, {}}; }
  static F1Averaging weighted() { return {Kind::Weighted, {}}; }
};

double accuracy(const ConfusionMatrix& cm);
double f1(const ConfusionMatrix& cm, const F1Averaging& averaging);

/// Binary matrices without failures use (TP*TN - FP*FN) / sqrt(...). Anything
/// else uses the K-class covariance form with the failure column as an extra
/// predicted class. A zero denominator yields 0.
double mcc(const ConfusionMatrix& cm);

struct ClassMetrics {
  std::string name;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
};

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);

struct ClassificationReport {
  double accuracy = 0;
  std::vector<ClassMetrics> per_class;
  double f1_macro = 0;
  double f1_micro = 0;
  double f1_weighted = 0;
  std::string positive_class;
  double f1_binary = 0;
  double mcc = 0;
  std::size_t n_items = 0;
  std::size_t n_parse_failures = 0;
  ConfusionMatrix matrix;
};

ClassificationReport classification_report(const ConfusionMatrix& cm, const std::string& positive_class);
nlohmann::ordered_json to_json(const ClassificationReport& report);

}  // namespace finharness
