#pragma once

#include "lfil/flowsim.hpp"
#include "lfil/topology.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace lfil {

// Class id = position in `classes`.
struct LabelSpace {
  std::vector<FaultScenario> classes;

  std::size_t size() const { return classes.size(); }
  const FaultScenario& at(int id) const { return classes.at(static_cast<std::size_t>(id)); }
  // -1 when absent.
  int id_of(const FaultScenario& scenario) const;

  nlohmann::json to_json() const;
  static LabelSpace from_json(const nlohmann::json& j);
};

nlohmann::json scenario_to_json(const FaultScenario& scenario);
FaultScenario scenario_from_json(const nlohmann::json& j);

// Class 0 = NoFault, class i = Disconnection(link i-1): |E| + 1 classes.
LabelSpace disconnection_label_space(const Topology& topology);
LabelSpace make_label_space(std::vector<FaultScenario> scenarios);

// Feature rows are stored in single precision so that the 9-significant-digit
// CSV form reproduces them bit for bit.
struct Dataset {
  std::size_t feature_count = 0;
  std::vector<float> features;  // row-major
  std::vector<int> labels;
  LabelSpace label_space;
  std::string fingerprint;  // topology fingerprint

  std::size_t rows() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const { return {features.data() + i * feature_count, feature_count}; }
  void append(std::span<const double> values, int label);
  std::vector<int> class_counts() const;
  // Distinct labels in ascending order.
  std::vector<int> present_classes() const;
  Dataset select(std::span<const std::size_t> rows) const;
};

// One demand draw per call; rows for every applicable class of the label
// space (scenarios that would partition the graph are skipped). Row noise
// seeds derive from (noise_seed, class id, sample index).
Dataset generate_dataset(const Topology& topology, const LabelSpace& label_space, std::size_t samples_per_class,
                         const DemandMatrix& demands, std::uint64_t noise_seed, const SimConfig& config);
Dataset generate_dataset(const Topology& topology, const LabelSpace& label_space, std::size_t samples_per_class,
                         std::uint64_t demand_seed, std::uint64_t noise_seed, const SimConfig& config);

// Per-pair rates uniform in [1, 300] Mbps.
DemandMatrix default_demands(std::size_t V, std::uint64_t demand_seed);

// Stratified, disjoint, exhaustive. Test rows per class follow largest
// remainder apportionment of round(rows * test_fraction).
std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

std::string to_csv(const Dataset& dataset);
// Label space and fingerprint are not part of the CSV; callers attach them.
Dataset from_csv(std::string_view text);

}  // namespace lfil
