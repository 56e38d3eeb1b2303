#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <numeric>

using namespace lfil;

namespace {

ExperimentConfig small_desk() {
  ExperimentConfig cfg;
  cfg.topology_file = test::data_path("desk10.edges");
  cfg.samples_per_class = 40;
  cfg.reconnection_samples_per_class = 30;
  cfg.max_reconnection_classes = 8;
  cfg.classifiers.forest.trees = 30;
  cfg.regressor.hidden = {64, 64};
  cfg.regressor.epochs = 80;
  return cfg;
}

struct Fixture {
  ExperimentConfig cfg = small_desk();
  Topology topo = load_topology(cfg);
  StageData data = generate_stage_data(topo, cfg);
  Pipeline pipe = train_pipeline(topo, data, cfg);
  DemandMatrix demands = default_demands(10, cfg.demand_seed);
};

const Fixture& desk() {
  static const Fixture f;
  return f;
}

std::vector<double> noiseless(const Fixture& f, const FaultScenario& s) {
  SimConfig quiet = f.cfg.sim;
  quiet.noise_std_fraction = 0.0;
  return simulate(f.topo, f.demands, s, quiet).values;
}

Eigen::MatrixXd random_rows(std::size_t n, std::size_t F, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(F));
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng) * 400.0;
  return X;
}

// Stage models fitted to random labels and targets: arbitrary outputs.
Pipeline scrambled_pipeline(std::uint64_t seed) {
  const auto& f = desk();
  const std::size_t V = 10, F = feature_count(V);
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd X = random_rows(60, F, seed);
  auto ls1 = f.pipe.stage1().meta.label_space;
  auto ls3 = f.pipe.stage3()->meta.label_space;
  std::vector<int> y1, y3;
  for (int i = 0; i < 60; ++i) {
    y1.push_back(static_cast<int>(rng() % ls1.size()));
    y3.push_back(static_cast<int>(rng() % ls3.size()));
  }
  y1[0] = 0;
  y1[1] = 1;
  auto pre = fit_preprocessor(X, 0.9);
  pre.topology_fingerprint = f.topo.fingerprint();
  Eigen::MatrixXd Z = pre.transform(X);
  TrainOptions opt;
  opt.forest.trees = 5;
  ClassifierStage s1{pre, train_classifier(Algorithm::RandomForest, Z, y1, opt),
                     {f.topo.fingerprint(), pre.fingerprint(), ls1, 1}};
  ClassifierStage s3{pre, train_classifier(Algorithm::RandomForest, Z, y3, opt),
                     {f.topo.fingerprint(), pre.fingerprint(), ls3, 3}};
  Eigen::MatrixXd R = random_rows(40, stage2_input_dim(V), seed + 1);
  Eigen::MatrixXd Y = random_rows(40, pair_count(V), seed + 2);
  RegressorStage s2{MlpRegressor::fit(R, Y, {.hidden = {8}, .epochs = 2}), {f.topo.fingerprint(), "", {}, 2}};
  return Pipeline(V, f.topo.fingerprint(), s1, s2, s3);
}

}  // namespace

TEST_CASE("delay error") {
  std::vector<double> a{10, 20, 30, 40};
  CHECK(delay_error(a, a) == 0.0);
  std::vector<double> doubled{20, 40, 60, 80};
  CHECK(delay_error(a, doubled) == doctest::Approx(0.5));
  std::vector<double> p{11, 18, 33, 39};
  const double base = delay_error(p, a);
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    std::vector<double> pc, ac;
    for (std::size_t i = 0; i < 4; ++i) {
      pc.push_back(c * p[i]);
      ac.push_back(c * a[i]);
    }
    CHECK(delay_error(pc, ac) == doctest::Approx(base).epsilon(1e-12));
  }
  CHECK(test::code_of([&] { delay_error(a, std::vector<double>{1, 2}); }) == Errc::DimensionMismatch);
}

TEST_CASE("stage-2 input layout") {
  std::vector<double> rates(pair_count(4));
  std::iota(rates.begin(), rates.end(), 1.0);
  auto x = stage2_input(rates, LinkKey(3, 1), 4);
  REQUIRE(static_cast<std::size_t>(x.size()) == stage2_input_dim(4));
  for (std::size_t i = 0; i < rates.size(); ++i) CHECK(x(static_cast<Eigen::Index>(i)) == rates[i]);
  const auto P = static_cast<Eigen::Index>(rates.size());
  CHECK(x.segment(P, 4) == Eigen::Vector4d(0, 1, 0, 0));
  CHECK(x.segment(P + 4, 4) == Eigen::Vector4d(0, 0, 0, 1));
}

TEST_CASE("comparator thresholds") {
  const auto& f = desk();
  const auto fv = noiseless(f, FaultScenario::disconnection(f.topo.link(0)));
  std::span<const double> all(fv);
  const auto P = pair_count(10);
  auto rates = all.subspan(0, P);
  const LinkKey l1 = f.topo.link(0).key;
  auto x = stage2_input(rates, l1, 10);
  Eigen::VectorXd pred = f.pipe.stage2().model.predict_one({x.data(), static_cast<std::size_t>(x.size())});
  std::vector<double> same(pred.data(), pred.data() + pred.size());
  auto r = f.pipe.stage2_identify(rates, l1, same, 0.10);
  CHECK(r.delay_error == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.type == FaultType::DisconnectionOnly);
  std::vector<double> twice;
  for (double v : same) twice.push_back(2.0 * v);
  r = f.pipe.stage2_identify(rates, l1, twice, 0.10);
  CHECK(r.delay_error == doctest::Approx(0.5));
  CHECK(r.type == FaultType::Reconnection);
}

TEST_CASE("noiseless memorization") {
  const auto& f = desk();
  auto none = f.pipe.diagnose(noiseless(f, FaultScenario::none()));
  CHECK_FALSE(none.fault_detected);
  CHECK(none.fault_type == FaultType::None);
  CHECK(none.inference_time_us > 0.0);

  for (auto id : removable_links(f.topo)) {
    const auto s = FaultScenario::disconnection(f.topo.link(id));
    const auto fv = noiseless(f, s);
    const int c = f.pipe.stage1_classify(fv);
    CHECK(f.pipe.stage1().meta.label_space.at(c) == s);
    auto d = f.pipe.diagnose(fv);
    CHECK(d.tentative_link == f.topo.link(id).key);
    CHECK(d.fault_type == FaultType::DisconnectionOnly);
    CHECK(d.disconnected_link == f.topo.link(id).key);
    CHECK(d.scenario_key() == s.key());
  }

  for (const auto& s : f.pipe.stage3()->meta.label_space.classes) {
    auto [l2, l3] = f.pipe.stage3_localize(noiseless(f, s));
    CHECK(l2 == s.removed->key);
    CHECK(l3 == s.added->key);
  }
}

TEST_CASE("diagnosis invariants") {
  Diagnosis d;
  CHECK_NOTHROW(d.validate());
  d.tentative_link = LinkKey(0, 1);
  CHECK(test::code_of([&] { d.validate(); }) == Errc::InvalidScenario);

  std::mt19937_64 rng(9);
  int valid = 0;
  for (int i = 0; i < 2000; ++i) {
    Diagnosis r;
    r.fault_detected = rng() & 1;
    r.fault_type = static_cast<FaultType>(rng() % 3);
    auto maybe = [&]() -> std::optional<LinkKey> {
      if (rng() % 3 == 0) return std::nullopt;
      return LinkKey(static_cast<NodeId>(rng() % 3), static_cast<NodeId>(3 + rng() % 3));
    };
    r.tentative_link = maybe();
    r.disconnected_link = rng() % 2 ? r.tentative_link : maybe();
    r.reconnected_link = maybe();
    if (rng() % 2) r.delay_error = 0.3;
    const bool expect =
        (r.fault_type == FaultType::None && !r.fault_detected && !r.tentative_link && !r.disconnected_link &&
         !r.reconnected_link && !r.delay_error) ||
        (r.fault_type == FaultType::DisconnectionOnly && r.fault_detected && r.tentative_link &&
         r.disconnected_link == r.tentative_link && !r.reconnected_link && r.delay_error) ||
        (r.fault_type == FaultType::Reconnection && r.fault_detected && r.tentative_link && r.disconnected_link &&
         r.reconnected_link && r.delay_error && r.disconnected_link != r.reconnected_link);
    CHECK(test::code_of([&] { r.validate(); }).has_value() == !expect);
    valid += expect;
  }
  CHECK(valid > 0);
}

TEST_CASE("pipelines with arbitrary model outputs keep the invariants and control flow") {
  const std::size_t P = pair_count(10);
  std::mt19937_64 rng(4);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto pipe = scrambled_pipeline(seed);
    Eigen::MatrixXd X = random_rows(150, feature_count(10), seed + 50);
    int types[3] = {0, 0, 0};
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      std::vector<double> fv(static_cast<std::size_t>(X.cols()));
      for (Eigen::Index k = 0; k < X.cols(); ++k) fv[static_cast<std::size_t>(k)] = X(r, k);
      const double threshold = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
      auto d = pipe.diagnose(fv, threshold);
      CHECK_NOTHROW(d.validate());
      ++types[static_cast<int>(d.fault_type)];

      const auto& s1 = pipe.stage1().meta.label_space.at(pipe.stage1_classify(fv));
      CHECK(d.fault_detected == (s1.kind != FaultKind::NoFault));
      CHECK(d.delay_error.has_value() == d.fault_detected);
      if (!d.fault_detected) continue;
      std::span<const double> all(fv);
      auto s2 = pipe.stage2_identify(all.subspan(0, P), *d.tentative_link, all.subspan(P, P), threshold);
      CHECK(*d.delay_error == s2.delay_error);
      CHECK(d.fault_type == s2.type);
      CHECK(d.reconnected_link.has_value() == (s2.type == FaultType::Reconnection));
      if (d.fault_type == FaultType::Reconnection) {
        auto [l2, l3] = pipe.stage3_localize(fv);
        CHECK(d.disconnected_link == l2);
        CHECK(d.reconnected_link == l3);
      }
    }
    CHECK(types[0] + types[1] + types[2] == 150);
  }
}

TEST_CASE("pipeline construction checks") {
  const auto& f = desk();
  const auto& p = f.pipe;
  CHECK(test::code_of([&] { Pipeline(10, "other", p.stage1(), p.stage2(), p.stage3()); }) == Errc::FingerprintMismatch);
  auto s1 = p.stage1();
  s1.meta.preprocessor_fingerprint = "0000";
  CHECK(test::code_of([&] { Pipeline(10, f.topo.fingerprint(), s1, p.stage2(), p.stage3()); }) ==
        Errc::FingerprintMismatch);
  CHECK(test::code_of([&] { Pipeline(11, f.topo.fingerprint(), p.stage1(), p.stage2(), p.stage3()); }) ==
        Errc::DimensionMismatch);
  CHECK(test::code_of([&] { Pipeline(10, f.topo.fingerprint(), p.stage1(), p.stage2(), p.stage3(), {.threshold = 0.0}); }) ==
        Errc::InvalidParams);
  CHECK(test::code_of([&] { Pipeline(10, f.topo.fingerprint(), p.stage1(), p.stage2(), p.stage3(), {.threshold = 1.0}); }) ==
        Errc::InvalidParams);
  std::vector<double> narrow(12, 1.0);
  CHECK(test::code_of([&] { p.diagnose(narrow); }) == Errc::DimensionMismatch);

  Pipeline two_stage(10, f.topo.fingerprint(), p.stage1(), p.stage2(), std::nullopt);
  auto fv = noiseless(f, *p.stage3()->meta.label_space.classes.begin());
  auto d = two_stage.diagnose(fv, 0.01);
  if (d.fault_detected) CHECK(d.fault_type == FaultType::DisconnectionOnly);
  CHECK(test::code_of([&] { two_stage.stage3_localize(fv); }) == Errc::InvalidParams);
}

TEST_CASE("diagnosis JSON") {
  Diagnosis d;
  d.fault_detected = true;
  d.tentative_link = LinkKey(1, 2);
  d.fault_type = FaultType::Reconnection;
  d.disconnected_link = LinkKey(1, 2);
  d.reconnected_link = LinkKey(1, 9);
  d.delay_error = 0.25;
  d.inference_time_us = 12.5;
  CHECK(d.scenario_key() == "r:1-2>1-9");
  auto j = d.to_json();
  CHECK(j["fault_detected"] == true);
  CHECK(j["fault_type"] == "Reconnection");
  CHECK(j["reconnected_link"] == nlohmann::ordered_json::array({1, 9}));
  CHECK(j.begin().key() == "fault_detected");
  Diagnosis none;
  CHECK(none.to_json()["tentative_link"].is_null());
}

TEST_CASE("saved pipelines diagnose identically") {
  const auto& f = desk();
  const auto dir = std::filesystem::temp_directory_path() / "lfil_pipeline_test";
  std::filesystem::remove_all(dir);
  write_pipeline(dir, f.pipe, {});
  auto back = read_pipeline(dir, 10, f.topo.fingerprint());
  auto mixed = make_mixed_set(f.data.stage1_test, f.data.stage3_test);
  for (std::size_t r = 0; r < mixed.data.rows(); r += 7) {
    auto row = mixed.data.row(r);
    std::vector<double> fv(row.begin(), row.end());
    auto a = f.pipe.diagnose(fv), b = back.diagnose(fv);
    CHECK(a.scenario_key() == b.scenario_key());
    CHECK(a.delay_error == b.delay_error);
  }
  CHECK(test::code_of([&] { read_pipeline(dir, 10, "feedfeedfeedfeed"); }) == Errc::FingerprintMismatch);
  std::filesystem::remove(dir / "stage2.model.json");
  CHECK(test::code_of([&] { read_pipeline(dir, 10, f.topo.fingerprint()); }) == Errc::IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mixed faults degrade stage 1 and the pipeline recovers") {
  const auto& f = desk();
  auto disc = evaluate_classifier_stage(f.pipe.stage1(), f.data.stage1_test, "disc");
  auto mixed = evaluate_mixed(f.pipe, make_mixed_set(f.data.stage1_test, f.data.stage3_test));
  MESSAGE("disconnection-only " << disc.scores.macro_f1 << ", stage 1 alone on mixed " << mixed.stage1_alone.scores.macro_f1
                                << ", pipeline " << mixed.pipeline.scores.macro_f1);
  CHECK(mixed.stage1_alone.scores.macro_f1 < disc.scores.macro_f1);
  CHECK(mixed.pipeline.scores.macro_f1 > mixed.stage1_alone.scores.macro_f1);
  CHECK(*disc.detection_accuracy >= disc.scores.accuracy);
  for (const auto& d : mixed.diagnoses) CHECK_NOTHROW(d.validate());
}
