#include "support.hpp"

#include <doctest.h>

#include <numeric>

using namespace lfil;

namespace {

ConfusionMatrix counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  // Class 0 is the class of interest; class 1 absorbs the rest.
  ConfusionMatrix cm(2);
  cm.add(0, 0, tp);
  cm.add(1, 0, fp);
  cm.add(0, 1, fn);
  return cm;
}

}  // namespace

TEST_CASE("worked precision, recall and F1") {
  auto s = precision_recall_f1(counts(9, 1, 3));
  const auto& c = s.per_class.at(0);
  CHECK(c.precision == doctest::Approx(0.9));
  CHECK(c.recall == doctest::Approx(0.75));
  CHECK(c.f1 == doctest::Approx(2 * 0.9 * 0.75 / 1.65));
  CHECK(c.f1 == doctest::Approx(0.8182).epsilon(1e-4));
  for (double x : {0.0, 0.3, 0.97, 1.0}) CHECK(f1_from(x, x) == doctest::Approx(x));
  CHECK(f1_from(0.0, 0.0) == 0.0);
}

TEST_CASE("reference F1 values follow from their precision and recall") {
  struct Row {
    double p, r, f1;
  };
  for (auto row : {Row{97.52, 96.46, 97.00}, Row{94.56, 92.40, 93.47}, Row{93.20, 91.22, 92.20}}) {
    const double f1 = f1_from(row.p / 100.0, row.r / 100.0);
    CHECK(std::abs(f1 - row.f1 / 100.0) <= 0.005);
  }
}

TEST_CASE("undefined ratios are reported as zero with a flag") {
  ConfusionMatrix cm(3);
  cm.add(0, 1, 4);  // class 0 never predicted, class 1 never true
  cm.add(2, 2, 5);
  auto s = precision_recall_f1(cm);
  REQUIRE(s.per_class.size() == 3);
  CHECK_FALSE(s.per_class[0].precision_defined);
  CHECK(s.per_class[0].recall_defined);
  CHECK(s.per_class[0].precision == 0.0);
  CHECK_FALSE(s.per_class[1].recall_defined);
  CHECK(s.per_class[2].f1 == 1.0);
  CHECK(s.macro_f1 == doctest::Approx(1.0 / 3.0));

  ConfusionMatrix sparse(5);
  sparse.add(1, 1, 3);
  sparse.add(3, 3, 3);
  auto t = precision_recall_f1(sparse);
  CHECK(t.per_class.size() == 2);
  CHECK(t.macro_f1 == 1.0);
}

TEST_CASE("scores match brute-force counters on random evaluations") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    auto lp = test::random_labels(seed);
    auto cm = ConfusionMatrix::from_labels(static_cast<std::size_t>(lp.K), lp.truth, lp.pred);
    auto s = precision_recall_f1(cm);
    auto o = test::oracle_scores(lp.truth, lp.pred, lp.K);
    CHECK(cm.total() == lp.truth.size());
    CHECK(s.per_class.size() == o.involved.size());
    CHECK(std::abs(s.macro_precision - o.macro_p) < 1e-12);
    CHECK(std::abs(s.macro_recall - o.macro_r) < 1e-12);
    CHECK(std::abs(s.macro_f1 - o.macro_f1) < 1e-12);
    CHECK(std::abs(s.micro_precision - o.micro_p) < 1e-12);
    CHECK(std::abs(s.micro_recall - o.micro_r) < 1e-12);
    CHECK(std::abs(s.micro_f1 - o.micro_f1) < 1e-12);
    CHECK(std::abs(s.accuracy - o.accuracy) < 1e-12);
    for (const auto& c : s.per_class) {
      CHECK(c.f1 >= 0.0);
      CHECK(c.f1 <= 1.0);
      if (c.precision_defined && c.recall_defined) {
        CHECK(c.f1 >= std::min(c.precision, c.recall) - 1e-15);
        CHECK(c.f1 <= std::max(c.precision, c.recall) + 1e-15);
      }
    }
  }
}

TEST_CASE("row order does not matter") {
  auto lp = test::random_labels(77);
  std::vector<std::size_t> order(lp.truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(3));
  std::vector<int> t2, p2;
  for (auto i : order) {
    t2.push_back(lp.truth[i]);
    p2.push_back(lp.pred[i]);
  }
  const auto K = static_cast<std::size_t>(lp.K);
  auto a = precision_recall_f1(ConfusionMatrix::from_labels(K, lp.truth, lp.pred));
  auto b = precision_recall_f1(ConfusionMatrix::from_labels(K, t2, p2));
  CHECK(a.macro_f1 == b.macro_f1);
  CHECK(a.micro_f1 == b.micro_f1);
  CHECK(a.macro_precision == b.macro_precision);
  CHECK(a.accuracy == b.accuracy);
}

TEST_CASE("merged confusion matrices equal one pass over all rows") {
  auto lp = test::random_labels(5);
  const auto K = static_cast<std::size_t>(lp.K);
  const std::size_t half = lp.truth.size() / 2;
  std::span<const int> t(lp.truth), p(lp.pred);
  auto a = ConfusionMatrix::from_labels(K, t.first(half), p.first(half));
  a.merge(ConfusionMatrix::from_labels(K, t.subspan(half), p.subspan(half)));
  auto whole = ConfusionMatrix::from_labels(K, t, p);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) CHECK(a.at(i, j) == whole.at(i, j));
  CHECK(test::code_of([&] { a.merge(ConfusionMatrix(K + 1)); }) == Errc::DimensionMismatch);
  CHECK(test::code_of([&] { a.add(static_cast<int>(K), 0); }) == Errc::InvalidParams);
}

TEST_CASE("R squared") {
  std::vector<double> a{1, 2, 3, 4, 5};
  CHECK(r2_score(a, a) == 1.0);
  std::vector<double> m(5, 3.0);
  CHECK(r2_score(m, a) == doctest::Approx(0.0));
  std::vector<double> c(5, 2.0);
  CHECK(test::code_of([&] { r2_score(a, c); }) == Errc::ConstantTarget);
  CHECK(test::code_of([&] { r2_score(std::vector<double>{1}, std::vector<double>{1}); }) == Errc::ConstantTarget);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 2000;
    std::vector<double> act(n), pred(n);
    const double offset = 1e3 * g(rng);
    for (std::size_t i = 0; i < n; ++i) {
      act[i] = offset + 50.0 * g(rng);
      pred[i] = act[i] + 10.0 * g(rng);
    }
    CHECK(std::abs(r2_score(pred, act) - test::oracle_r2(pred, act)) < 1e-12);
  }
}

TEST_CASE("fault detection accuracy") {
  std::vector<int> truth{0, 1, 2, 3, 4, 0};
  CHECK(fault_detection_accuracy(std::vector<int>{0, 2, 3, 4, 1, 0}, truth) == 1.0);
  CHECK(fault_detection_accuracy(std::vector<int>{0, 0, 3, 0, 1, 2}, truth) == 0.5);
  CHECK(test::code_of([] { fault_detection_accuracy(std::vector<int>{0, 1}, std::vector<int>{0, 0}); }) ==
        Errc::NoFaultyPoints);

  // Detection is implied by correct localization: pooled over all faulty
  // rows, and within each fault class.
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto lp = test::random_labels(seed);
    if (std::all_of(lp.truth.begin(), lp.truth.end(), [](int t) { return t == 0; })) continue;
    const double det = fault_detection_accuracy(lp.pred, lp.truth);
    std::size_t faulty = 0, localized = 0;
    for (std::size_t i = 0; i < lp.truth.size(); ++i)
      if (lp.truth[i] != 0) {
        ++faulty;
        localized += lp.pred[i] == lp.truth[i];
      }
    CHECK(det >= static_cast<double>(localized) / static_cast<double>(faulty));

    auto s = precision_recall_f1(ConfusionMatrix::from_labels(static_cast<std::size_t>(lp.K), lp.truth, lp.pred));
    for (const auto& c : s.per_class) {
      if (c.label == 0 || !c.recall_defined) continue;
      std::vector<int> t, p;
      for (std::size_t i = 0; i < lp.truth.size(); ++i)
        if (lp.truth[i] == c.label) {
          t.push_back(lp.truth[i]);
          p.push_back(lp.pred[i]);
        }
      CHECK(fault_detection_accuracy(p, t) >= c.recall);
    }
  }
}

TEST_CASE("timing summary") {
  std::vector<double> t;
  for (int i = 100; i >= 1; --i) t.push_back(i);
  auto s = summarize_times(t);
  CHECK(s.count == 100);
  CHECK(s.mean == doctest::Approx(50.5));
  CHECK(s.p50 == 50);
  CHECK(s.p95 == 95);
  CHECK(s.p99 == 99);
  CHECK(s.max == 100);
  CHECK(summarize_times({}).count == 0);
}

TEST_CASE("report serialization") {
  EvaluationReport r;
  r.name = "perfect";
  r.scores = precision_recall_f1(ConfusionMatrix::from_labels(3, std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}));
  r.class_names = {"none", "d:0-1", "d:1-2"};
  r.detection_accuracy = 1.0;
  auto j = r.to_json();
  CHECK(j["macro"]["f1"] == 1.0);
  CHECK(j["accuracy"] == 1.0);
  CHECK(r.headline_f1() == 1.0);
  const auto csv = r.to_csv();
  CHECK(csv.rfind("metric,class,value\n", 0) == 0);
  CHECK(csv.find("f1,all,1") != std::string::npos);
  CHECK(csv.find("f1,d:1-2,1") != std::string::npos);
  r.micro = true;
  CHECK(r.headline_f1() == r.scores.micro_f1);
}
