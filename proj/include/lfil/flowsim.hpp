#pragma once

#include "lfil/topology.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lfil {

// Ordered pairs (s, d), s != d, in lexicographic order.
inline std::size_t pair_count(std::size_t V) { return V * (V - 1); }
inline std::size_t pair_index(std::size_t V, std::size_t s, std::size_t d) {
  return s * (V - 1) + (d < s ? d : d - 1);
}
std::pair<NodeId, NodeId> pair_at(std::size_t V, std::size_t index);

struct SimConfig {
  double queueing_base_delay_us = 10.0;
  double max_utilization_cap = 0.95;
  double reconvergence_time_ms = 50.0;
  double measurement_interval_ms = 1000.0;
  double noise_std_fraction = 0.02;
  double probe_overhead_us = 1.0;

  void validate() const;
};

class DemandMatrix {
 public:
  explicit DemandMatrix(std::size_t V) : V_(V), rates_(V * V, 0.0) {}

  // Every off-diagonal rate uniform in [lo, hi] Mbps.
  static DemandMatrix uniform(std::size_t V, double lo, double hi, std::uint64_t seed);

  std::size_t node_count() const { return V_; }
  double operator()(std::size_t s, std::size_t d) const { return rates_[s * V_ + d]; }
  void set(std::size_t s, std::size_t d, double rate);

 private:
  std::size_t V_;
  std::vector<double> rates_;
};

struct Path {
  std::vector<NodeId> nodes;
  std::vector<std::size_t> links;
};

struct PathTable {
  std::size_t V = 0;
  std::vector<Path> paths;  // indexed by pair_index

  const Path& at(std::size_t s, std::size_t d) const { return paths[pair_index(V, s, d)]; }
};

// Hop-minimal paths; ties go to the lexicographically smallest node sequence.
PathTable shortest_paths(const Topology& topology);

// Σ over pairs whose path contains the link of b_{s,d}, per link id.
std::vector<double> link_loads(const PathTable& paths, const DemandMatrix& demands, std::size_t link_count);

// One-way link delays (µs) at the given loads.
std::vector<double> link_delays(std::span<const double> loads, const Topology& topology, const SimConfig& config);

// RTT per pair: forward path delay plus reverse path delay.
std::vector<double> pair_delay(const PathTable& paths, std::span<const double> loads, const Topology& topology,
                               const SimConfig& config);

// Pairs whose pre-fault path used the scenario's removed link.
std::vector<char> disrupted_pairs(const PathTable& pre_fault_paths, const Topology& pre_fault,
                                  const FaultScenario& scenario);

// Congestion loss composed along the path, plus transient reroute loss for
// disrupted pairs.
std::vector<double> pair_loss(const PathTable& paths, std::span<const double> loads, const Topology& topology,
                              std::span<const char> disrupted, const SimConfig& config);

struct FeatureVector {
  std::size_t V = 0;
  // rates block, delays block, losses block; each pair_count(V) long.
  std::vector<double> values;
  FaultScenario label;

  std::size_t feature_count() const { return values.size(); }
  std::span<const double> rates() const { return {values.data(), pair_count(V)}; }
  std::span<const double> delays() const { return {values.data() + pair_count(V), pair_count(V)}; }
  std::span<const double> losses() const { return {values.data() + 2 * pair_count(V), pair_count(V)}; }
};

inline std::size_t feature_count(std::size_t V) { return 3 * pair_count(V); }

// Noiseless features for the topology after applying the scenario.
FeatureVector simulate(const Topology& topology, const DemandMatrix& demands, const FaultScenario& scenario,
                       const SimConfig& config);

// Multiplicative Gaussian noise, clamped to each block's valid range.
void add_measurement_noise(FeatureVector& features, double std_fraction, std::uint64_t seed);

FeatureVector measure(const Topology& topology, const DemandMatrix& demands, const FaultScenario& scenario,
                      const SimConfig& config, std::uint64_t seed);

struct MeasureJob {
  std::size_t scenario;  // index into the scenario list
  std::uint64_t seed;
};

// Batch kernel: one noisy feature vector per job. The parallel variant
// simulates each distinct scenario once and fans noise out per job; both
// variants return identical results.
std::vector<FeatureVector> measure_batch_serial(const Topology& topology, const DemandMatrix& demands,
                                                std::span<const FaultScenario> scenarios,
                                                std::span<const MeasureJob> jobs, const SimConfig& config);
std::vector<FeatureVector> measure_batch(const Topology& topology, const DemandMatrix& demands,
                                         std::span<const FaultScenario> scenarios, std::span<const MeasureJob> jobs,
                                         const SimConfig& config);

// RTT from the monitor to every other node at the given link loads
// (zero loads when empty), indexed by destination node; entry for the
// monitor itself is 0.
std::vector<double> monitor_rtts(const Topology& topology, const PathTable& paths, std::span<const double> loads,
                                 const SimConfig& config, NodeId monitor = 0);

// Sequential ping sweep from the monitor: Σ RTT + per-probe overhead.
double simulate_probe_sweep(const Topology& topology, const SimConfig& config, std::span<const double> loads = {},
                            NodeId monitor = 0);

}  // namespace lfil
