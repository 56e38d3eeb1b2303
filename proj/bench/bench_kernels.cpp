// Serial reference against the OpenMP kernel for each parallel hot spot.
#include "lfil/experiment.hpp"
#include "lfil/rng.hpp"

#include <benchmark/benchmark.h>

#include <string>

using namespace lfil;

namespace {

Topology reference(const std::string& name) {
  return load_edge_list(read_file(std::string(LFIL_DATA_DIR) + "/" + name));
}

struct BatchInput {
  Topology topology = reference("ref30.edges");
  DemandMatrix demands = default_demands(topology.node_count(), 1);
  std::vector<FaultScenario> scenarios = enumerate_scenarios(topology, {.no_fault = true, .disconnection = true});
  std::vector<MeasureJob> jobs = [this] {
    std::vector<MeasureJob> out;
    for (std::size_t s = 0; s < scenarios.size(); ++s)
      for (std::uint64_t i = 0; i < 4; ++i) out.push_back({s, derive_seed(s, i)});
    return out;
  }();
  SimConfig sim;
};

const BatchInput& batch_input() {
  static const BatchInput in;
  return in;
}

void BM_MeasureBatchSerial(benchmark::State& state) {
  const auto& in = batch_input();
  for (auto _ : state)
    benchmark::DoNotOptimize(measure_batch_serial(in.topology, in.demands, in.scenarios, in.jobs, in.sim));
}
void BM_MeasureBatch(benchmark::State& state) {
  const auto& in = batch_input();
  for (auto _ : state) benchmark::DoNotOptimize(measure_batch(in.topology, in.demands, in.scenarios, in.jobs, in.sim));
}

struct ForestInput {
  Eigen::MatrixXd X;
  std::vector<int> y;
  ForestConfig config{.trees = 50};
};

const ForestInput& forest_input() {
  static const ForestInput in = [] {
    ExperimentConfig cfg;
    cfg.topology_file = std::string(LFIL_DATA_DIR) + "/desk10.edges";
    cfg.samples_per_class = 60;
    const Topology t = load_topology(cfg);
    const Dataset d = generate_dataset(t, disconnection_label_space(t), cfg.samples_per_class,
                                       default_demands(t.node_count(), 1), 2, cfg.sim);
    ForestInput f;
    f.X.resize(static_cast<Eigen::Index>(d.rows()), static_cast<Eigen::Index>(d.feature_count));
    for (std::size_t r = 0; r < d.rows(); ++r)
      for (std::size_t c = 0; c < d.feature_count; ++c) f.X(r, c) = d.row(r)[c];
    f.y = d.labels;
    return f;
  }();
  return in;
}

void BM_ForestFitSerial(benchmark::State& state) {
  const auto& in = forest_input();
  for (auto _ : state) benchmark::DoNotOptimize(RandomForest::fit_serial(in.X, in.y, in.config));
}
void BM_ForestFit(benchmark::State& state) {
  const auto& in = forest_input();
  for (auto _ : state) benchmark::DoNotOptimize(RandomForest::fit(in.X, in.y, in.config));
}

void BM_CandidateSignaturesSerial(benchmark::State& state) {
  const auto& in = batch_input();
  for (auto _ : state) benchmark::DoNotOptimize(candidate_signatures_serial(in.topology, in.demands, in.sim, 0));
}
void BM_CandidateSignatures(benchmark::State& state) {
  const auto& in = batch_input();
  for (auto _ : state) benchmark::DoNotOptimize(candidate_signatures(in.topology, in.demands, in.sim, 0));
}

}  // namespace

BENCHMARK(BM_MeasureBatchSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MeasureBatch)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestFitSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestFit)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CandidateSignaturesSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CandidateSignatures)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
