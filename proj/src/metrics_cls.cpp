#include "finharness/metrics_cls.hpp"

#include <cmath>
#include <numeric>

namespace finharness {

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double harmonic(double p, double r) { return safe_div(2.0 * p * r, p + r); }

void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EmptyMatrixError();
}

struct Tallies {
  std::vector<double> tp, fp, fn, support;
};

Tallies tallies(const ConfusionMatrix& cm) {
  const std::size_t k = cm.size();
  Tallies t{std::vector<double>(k), std::vector<double>(k), std::vector<double>(k), std::vector<double>(k)};
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto c = static_cast<double>(cm.counts[i][j]);
      t.support[i] += c;
      if (i == j) {
        t.tp[i] += c;
      } else {
        t.fn[i] += c;
        t.fp[j] += c;
      }
    }
    t.support[i] += static_cast<double>(cm.failures[i]);
    t.fn[i] += static_cast<double>(cm.failures[i]);
  }
  return t;
}

}  // namespace

ConfusionMatrix ConfusionMatrix::from_counts(std::vector<std::string> classes,
                                             std::vector<std::vector<std::size_t>> counts,
                                             std::vector<std::size_t> failures) {
  const std::size_t k = classes.size();
  if (counts.size() != k) throw LengthMismatchError("count matrix rows do not match class count");
  for (const auto& row : counts) {
    if (row.size() != k) throw LengthMismatchError("count matrix is not square");
  }
  if (failures.empty()) failures.assign(k, 0);
  if (failures.size() != k) throw LengthMismatchError("failure column does not match class count");
  return {std::move(classes), std::move(counts), std::move(failures)};
}

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = total_failures();
  for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

std::size_t ConfusionMatrix::total_failures() const noexcept {
  return std::accumulate(failures.begin(), failures.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::index_of(std::string_view cls) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == cls) return i;
  }
  throw Error("unknown class '" + std::string(cls) + "'");
}

ConfusionMatrix confusion(std::span<const std::string> gold, std::span<const ParseOutcome<Label>> pred,
                          std::span<const std::string> classes) {
  if (gold.size() != pred.size()) {
    throw LengthMismatchError("gold has " + std::to_string(gold.size()) + " items, predictions " +
                              std::to_string(pred.size()));
  }
  const std::size_t k = classes.size();
  auto cm = ConfusionMatrix::from_counts({classes.begin(), classes.end()},
                                         std::vector<std::vector<std::size_t>>(k, std::vector<std::size_t>(k, 0)));
  for (std::size_t n = 0; n < gold.size(); ++n) {
    const std::size_t i = cm.index_of(gold[n]);
    std::size_t j = k;
    if (pred[n].ok()) {
      for (std::size_t c = 0; c < k; ++c) {
        if (classes[c] == pred[n].result->value) j = c;
      }
    }
    if (j == k) {
      ++cm.failures[i];
    } else {
      ++cm.counts[i][j];
    }
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < cm.size(); ++i) correct += cm.counts[i][i];
  return static_cast<double>(correct) / static_cast<double>(cm.total());
}

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
  const auto t = tallies(cm);
  std::vector<ClassMetrics> out;
  for (std::size_t i = 0; i < cm.size(); ++i) {
    const double p = safe_div(t.tp[i], t.tp[i] + t.fp[i]);
    const double r = safe_div(t.tp[i], t.tp[i] + t.fn[i]);
    out.push_back({cm.classes[i], p, r, harmonic(p, r), static_cast<std::size_t>(t.support[i])});
  }
  return out;
}

double f1(const ConfusionMatrix& cm, const F1Averaging& averaging) {
  require_nonempty(cm);
  const auto per = per_class_metrics(cm);
  switch (averaging.kind) {
    case F1Averaging::Kind::Binary:
      return per[cm.index_of(averaging.positive)].f1;
    case F1Averaging::Kind::Macro: {
      double sum = 0;
      for (const auto& c : per) sum += c.f1;
      return sum / static_cast<double>(per.size());
    }
    case F1Averaging::Kind::Weighted: {
      double sum = 0, support = 0;
      for (const auto& c : per) {
        sum += c.f1 * static_cast<double>(c.support);
        support += static_cast<double>(c.support);
      }
      return safe_div(sum, support);
    }
    case F1Averaging::Kind::Micro: {
      const auto t = tallies(cm);
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < cm.size(); ++i) {
        tp += t.tp[i];
        fp += t.fp[i];
        fn += t.fn[i];
      }
      return harmonic(safe_div(tp, tp + fp), safe_div(tp, tp + fn));
    }
  }
  return 0.0;
}

double mcc(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  if (cm.size() == 2 && cm.total_failures() == 0) {
    // Class 0 as positive; the value is symmetric under swapping.
    const auto tp = static_cast<double>(cm.counts[0][0]);
    const auto fn = static_cast<double>(cm.counts[0][1]);
    const auto fp = static_cast<double>(cm.counts[1][0]);
    const auto tn = static_cast<double>(cm.counts[1][1]);
    const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    return den == 0.0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den);
  }

  const std::size_t k = cm.size();
  double correct = 0, s = 0;
  std::vector<double> t(k, 0.0), p(k + 1, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto c = static_cast<double>(cm.counts[i][j]);
      t[i] += c;
      p[j] += c;
      if (i == j) correct += c;
    }
    t[i] += static_cast<double>(cm.failures[i]);
    p[k] += static_cast<double>(cm.failures[i]);
  }
  for (double v : t) s += v;
  double sum_pt = 0, sum_pp = 0, sum_tt = 0;
  for (std::size_t i = 0; i < k; ++i) sum_pt += p[i] * t[i];
  for (double v : p) sum_pp += v * v;
  for (double v : t) sum_tt += v * v;
  const double den = (s * s - sum_pp) * (s * s - sum_tt);
  return den <= 0.0 ? 0.0 : (correct * s - sum_pt) / std::sqrt(den);
}

ClassificationReport classification_report(const ConfusionMatrix& cm, const std::string& positive_class) {
  require_nonempty(cm);
  ClassificationReport r;
  r.accuracy = accuracy(cm);
  r.per_class = per_class_metrics(cm);
  r.f1_macro = f1(cm, F1Averaging::macro());
  r.f1_micro = f1(cm, F1Averaging::micro());
  r.f1_weighted = f1(cm, F1Averaging::weighted());
  r.positive_class = positive_class;
  r.f1_binary = f1(cm, F1Averaging::binary(positive_class));
  r.mcc = mcc(cm);
  r.n_items = cm.total();
  r.n_parse_failures = cm.total_failures();
  r.matrix = cm;
  return r;
}

nlohmann::ordered_json to_json(const ClassificationReport& report) {
  nlohmann::ordered_json j;
  j["task"] = "classification";
  j["n_items"] = report.n_items;
  j["n_parse_failures"] = report.n_parse_failures;
  j["accuracy"] = report.accuracy;
  j["f1_macro"] = report.f1_macro;
  j["f1_micro"] = report.f1_micro;
  j["f1_weighted"] = report.f1_weighted;
  j["f1_binary"] = {{"positive_class", report.positive_class}, {"value", report.f1_binary}};
  j["mcc"] = report.mcc;
  auto per = nlohmann::ordered_json::array();
  for (const auto& c : report.per_class) {
    per.push_back({{"class", c.name}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
                   {"support", c.support}});
  }
  j["per_class"] = per;
  j["confusion"] = {{"classes", report.matrix.classes},
                    {"counts", report.matrix.counts},
                    {"parse_failures", report.matrix.failures}};
  return j;
}

}  // namespace finharness
