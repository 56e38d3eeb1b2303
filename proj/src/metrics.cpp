#include "lfil/metrics.hpp"

#include "lfil/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace lfil {

ConfusionMatrix ConfusionMatrix::from_labels(std::size_t classes, std::span<const int> truth,
                                             std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw Error(Errc::DimensionMismatch, "truth vs predicted length");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

void ConfusionMatrix::add(int truth, int predicted, std::uint64_t count) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= K_ || static_cast<std::size_t>(predicted) >= K_)
    throw Error(Errc::InvalidParams, "label outside the confusion matrix");
  counts_[static_cast<std::size_t>(truth) * K_ + static_cast<std::size_t>(predicted)] += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.K_ != K_) throw Error(Errc::DimensionMismatch, "confusion matrix sizes differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::false_positives(std::size_t k) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < K_; ++t)
    if (t != k) s += at(t, k);
  return s;
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t k) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < K_; ++p)
    if (p != k) s += at(k, p);
  return s;
}

bool ConfusionMatrix::involved(std::size_t k) const {
  for (std::size_t j = 0; j < K_; ++j)
    if (at(k, j) || at(j, k)) return true;
  return false;
}

double f1_from(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Scores precision_recall_f1(const ConfusionMatrix& cm) {
  Scores out;
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    if (!cm.involved(k)) continue;
    ClassScore c;
    c.label = static_cast<int>(k);
    c.tp = cm.true_positives(k);
    c.fp = cm.false_positives(k);
    c.fn = cm.false_negatives(k);
    c.precision_defined = c.tp + c.fp > 0;
    c.recall_defined = c.tp + c.fn > 0;
    if (c.precision_defined) c.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.recall_defined) c.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    c.f1 = f1_from(c.precision, c.recall);
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
    out.per_class.push_back(c);
  }
  if (!out.per_class.empty()) {
    const double n = static_cast<double>(out.per_class.size());
    for (const auto& c : out.per_class) {
      out.macro_precision += c.precision;
      out.macro_recall += c.recall;
      out.macro_f1 += c.f1;
    }
    out.macro_precision /= n;
    out.macro_recall /= n;
    out.macro_f1 /= n;
  }
  if (tp + fp > 0) out.micro_precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) out.micro_recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  out.micro_f1 = f1_from(out.micro_precision, out.micro_recall);
  const auto total = cm.total();
  if (total > 0) out.accuracy = static_cast<double>(tp) / static_cast<double>(total);
  return out;
}

double r2_score(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw Error(Errc::DimensionMismatch, "predicted vs actual length");
  if (actual.size() < 2) throw Error(Errc::ConstantTarget, "R² needs at least two values");
  double mean = 0.0;
  for (double a : actual) mean += a;
  mean /= static_cast<double>(actual.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double r = actual[i] - predicted[i];
    const double t = actual[i] - mean;
    ss_res += r * r;
    ss_tot += t * t;
  }
  if (!(ss_tot > 0.0)) throw Error(Errc::ConstantTarget, "R² is undefined for a constant target");
  return 1.0 - ss_res / ss_tot;
}

double fault_detection_accuracy(std::span<const int> predicted, std::span<const int> truth, int no_fault_class) {
  if (predicted.size() != truth.size()) throw Error(Errc::DimensionMismatch, "truth vs predicted length");
  std::size_t faulty = 0, detected = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == no_fault_class) continue;
    ++faulty;
    if (predicted[i] != no_fault_class) ++detected;
  }
  if (faulty == 0) throw Error(Errc::NoFaultyPoints, "no faulty rows to score");
  return static_cast<double>(detected) / static_cast<double>(faulty);
}

TimingSummary summarize_times(std::vector<double> t) {
  TimingSummary s;
  s.count = t.size();
  if (t.empty()) return s;
  std::sort(t.begin(), t.end());
  double sum = 0.0;
  for (double v : t) sum += v;
  s.mean = sum / static_cast<double>(t.size());
  auto rank = [&](double q) {
    const auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(t.size())));
    return t[std::clamp<std::size_t>(r, 1, t.size()) - 1];
  };
  s.p50 = rank(0.50);
  s.p95 = rank(0.95);
  s.p99 = rank(0.99);
  s.max = t.back();
  return s;
}

namespace {

std::string class_name(const EvaluationReport& r, int label) {
  if (label >= 0 && static_cast<std::size_t>(label) < r.class_names.size()) return r.class_names[label];
  return std::to_string(label);
}

}  // namespace

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : scores.per_class)
    classes.push_back({{"label", c.label},
                       {"name", class_name(*this, c.label)},
                       {"tp", c.tp},
                       {"fp", c.fp},
                       {"fn", c.fn},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"precision_defined", c.precision_defined},
                       {"recall_defined", c.recall_defined}});
  nlohmann::json j = {{"name", name},
                      {"averaging", micro ? "micro" : "macro"},
                      {"precision", micro ? scores.micro_precision : scores.macro_precision},
                      {"recall", micro ? scores.micro_recall : scores.macro_recall},
                      {"f1", headline_f1()},
                      {"macro", {{"precision", scores.macro_precision}, {"recall", scores.macro_recall},
                                 {"f1", scores.macro_f1}}},
                      {"micro", {{"precision", scores.micro_precision}, {"recall", scores.micro_recall},
                                 {"f1", scores.micro_f1}}},
                      {"accuracy", scores.accuracy},
                      {"classes", classes}};
  if (detection_accuracy) j["detection_accuracy"] = *detection_accuracy;
  if (r2) j["r2"] = *r2;
  if (timing)
    j["inference_time_us"] = {{"count", timing->count}, {"mean", timing->mean}, {"p50", timing->p50},
                              {"p95", timing->p95},     {"p99", timing->p99},   {"max", timing->max}};
  return j;
}

std::string EvaluationReport::to_csv() const {
  std::string out = "metric,class,value\n";
  char buf[64];
  auto row = [&](const std::string& metric, const std::string& cls, double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out += metric + "," + cls + "," + buf + "\n";
  };
  row("precision", "all", micro ? scores.micro_precision : scores.macro_precision);
  row("recall", "all", micro ? scores.micro_recall : scores.macro_recall);
  row("f1", "all", headline_f1());
  row("accuracy", "all", scores.accuracy);
  if (detection_accuracy) row("detection_accuracy", "all", *detection_accuracy);
  if (r2) row("r2", "all", *r2);
  if (timing) {
    row("time_mean_us", "all", timing->mean);
    row("time_p50_us", "all", timing->p50);
    row("time_p95_us", "all", timing->p95);
  }
  for (const auto& c : scores.per_class) {
    const auto n = class_name(*this, c.label);
    row("precision", n, c.precision);
    row("recall", n, c.recall);
    row("f1", n, c.f1);
  }
  return out;
}

}  // namespace lfil
