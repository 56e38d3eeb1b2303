#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace lfil {

// Rows = true class, columns = predicted class; ids are 0..K-1.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : K_(classes), counts_(classes * classes, 0) {}
  static ConfusionMatrix from_labels(std::size_t classes, std::span<const int> truth, std::span<const int> predicted);

  std::size_t classes() const { return K_; }
  void add(int truth, int predicted, std::uint64_t count = 1);
  void merge(const ConfusionMatrix& other);

  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * K_ + predicted]; }
  std::uint64_t total() const;
  std::uint64_t true_positives(std::size_t k) const { return at(k, k); }
  std::uint64_t false_positives(std::size_t k) const;
  std::uint64_t false_negatives(std::size_t k) const;
  // True or predicted at least once.
  bool involved(std::size_t k) const;

 private:
  std::size_t K_;
  std::vector<std::uint64_t> counts_;
};

struct ClassScore {
  int label = 0;
  std::uint64_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Undefined ratios are reported as 0 with the flag cleared.
  bool precision_defined = false;
  bool recall_defined = false;
};

struct Scores {
  std::vector<ClassScore> per_class;  // classes that are true or predicted at least once
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;
  double accuracy = 0.0;
};

// 2PR/(P+R), 0 when P + R = 0.
double f1_from(double precision, double recall);
Scores precision_recall_f1(const ConfusionMatrix& cm);

// 1 − SS_res/SS_tot pooled over every value. Throws ConstantTarget on
// fewer than two values or constant actuals.
double r2_score(std::span<const double> predicted, std::span<const double> actual);

// Fraction of rows with a faulty truth whose prediction is any fault class.
// Throws NoFaultyPoints when no truth row is faulty.
double fault_detection_accuracy(std::span<const int> predicted, std::span<const int> truth, int no_fault_class = 0);

struct TimingSummary {
  std::size_t count = 0;
  double mean = 0.0, p50 = 0.0, p95 = 0.0, p99 = 0.0, max = 0.0;
};

// Nearest-rank percentiles.
TimingSummary summarize_times(std::vector<double> times_us);

struct EvaluationReport {
  std::string name;
  Scores scores;
  std::vector<std::string> class_names;  // indexed by label; may be empty
  std::optional<double> detection_accuracy;
  std::optional<double> r2;
  std::optional<TimingSummary> timing;
  bool micro = false;  // headline P/R/F1 use micro averaging

  double headline_f1() const { return micro ? scores.micro_f1 : scores.macro_f1; }
  nlohmann::json to_json() const;
  // Flat "metric,class,value" rows; class is "all" for aggregates.
  std::string to_csv() const;
};

}  // namespace lfil
