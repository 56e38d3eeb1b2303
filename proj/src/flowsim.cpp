#include "lfil/flowsim.hpp"

#include "lfil/error.hpp"
#include "lfil/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

namespace lfil {

std::pair<NodeId, NodeId> pair_at(std::size_t V, std::size_t index) {
  const auto s = static_cast<NodeId>(index / (V - 1));
  auto d = static_cast<NodeId>(index % (V - 1));
  if (d >= s) ++d;
  return {s, d};
}

void SimConfig::validate() const {
  auto bad = [](const char* what) { throw Error(Errc::InvalidParams, std::string("SimConfig: ") + what); };
  if (!(queueing_base_delay_us >= 0.0)) bad("queueing_base_delay_us must be >= 0");
  if (!(max_utilization_cap > 0.0 && max_utilization_cap < 1.0)) bad("max_utilization_cap must lie in (0, 1)");
  if (!(reconvergence_time_ms >= 0.0)) bad("reconvergence_time_ms must be >= 0");
  if (!(measurement_interval_ms > 0.0)) bad("measurement_interval_ms must be > 0");
  if (!(noise_std_fraction >= 0.0)) bad("noise_std_fraction must be >= 0");
  if (!(probe_overhead_us >= 0.0)) bad("probe_overhead_us must be >= 0");
}

DemandMatrix DemandMatrix::uniform(std::size_t V, double lo, double hi, std::uint64_t seed) {
  DemandMatrix m(V);
  Rng rng(derive_seed(seed, 0xde4a));
  std::uniform_real_distribution<double> rate(lo, hi);
  for (std::size_t s = 0; s < V; ++s)
    for (std::size_t d = 0; d < V; ++d)
      if (s != d) m.rates_[s * V + d] = rate(rng);
  return m;
}

void DemandMatrix::set(std::size_t s, std::size_t d, double rate) {
  if (s == d) throw Error(Errc::InvalidParams, "diagonal demand must stay zero");
  if (!(rate >= 0.0)) throw Error(Errc::InvalidParams, "demand must be non-negative");
  rates_[s * V_ + d] = rate;
}

PathTable shortest_paths(const Topology& topology) {
  const std::size_t V = topology.node_count();
  PathTable table;
  table.V = V;
  table.paths.resize(pair_count(V));
  std::vector<int> dist(V);
  for (NodeId d = 0; d < V; ++d) {
    std::fill(dist.begin(), dist.end(), -1);
    std::queue<NodeId> q;
    dist[d] = 0;
    q.push(d);
    while (!q.empty()) {
      NodeId x = q.front();
      q.pop();
      for (const auto& a : topology.neighbors(x))
        if (dist[a.node] < 0) {
          dist[a.node] = dist[x] + 1;
          q.push(a.node);
        }
    }
    for (NodeId s = 0; s < V; ++s) {
      if (s == d) continue;
      if (dist[s] < 0)
        throw Error(Errc::Unreachable, "no path " + std::to_string(s) + "->" + std::to_string(d));
      Path& p = table.paths[pair_index(V, s, d)];
      p.nodes.reserve(static_cast<std::size_t>(dist[s]) + 1);
      p.links.reserve(static_cast<std::size_t>(dist[s]));
      NodeId x = s;
      p.nodes.push_back(x);
      while (x != d) {
        // Neighbors are sorted, so the first hop closer to d is the
        // lexicographically smallest continuation.
        for (const auto& a : topology.neighbors(x)) {
          if (dist[a.node] == dist[x] - 1) {
            p.links.push_back(a.link);
            x = a.node;
            break;
          }
        }
        p.nodes.push_back(x);
      }
    }
  }
  return table;
}

std::vector<double> link_loads(const PathTable& paths, const DemandMatrix& demands, std::size_t link_count) {
  std::vector<double> loads(link_count, 0.0);
  for (std::size_t i = 0; i < paths.paths.size(); ++i) {
    const auto [s, d] = pair_at(paths.V, i);
    const double rate = demands(s, d);
    for (std::size_t l : paths.paths[i].links) loads[l] += rate;
  }
  return loads;
}

std::vector<double> link_delays(std::span<const double> loads, const Topology& topology, const SimConfig& config) {
  std::vector<double> delay(topology.link_count());
  for (std::size_t l = 0; l < delay.size(); ++l) {
    const Link& link = topology.link(l);
    const double load = loads.empty() ? 0.0 : loads[l];
    const double utilization = std::min(load / link.capacity_mbps, config.max_utilization_cap);
    delay[l] = link.prop_delay_us() + config.queueing_base_delay_us / (1.0 - utilization);
  }
  return delay;
}

std::vector<double> pair_delay(const PathTable& paths, std::span<const double> loads, const Topology& topology,
                               const SimConfig& config) {
  const auto per_link = link_delays(loads, topology, config);
  std::vector<double> one_way(paths.paths.size(), 0.0);
  for (std::size_t i = 0; i < paths.paths.size(); ++i)
    for (std::size_t l : paths.paths[i].links) one_way[i] += per_link[l];
  std::vector<double> rtt(paths.paths.size());
  for (std::size_t i = 0; i < rtt.size(); ++i) {
    const auto [s, d] = pair_at(paths.V, i);
    rtt[i] = one_way[i] + one_way[pair_index(paths.V, d, s)];
  }
  return rtt;
}

std::vector<char> disrupted_pairs(const PathTable& pre_fault_paths, const Topology& pre_fault,
                                  const FaultScenario& scenario) {
  std::vector<char> out(pre_fault_paths.paths.size(), 0);
  if (!scenario.removed) return out;
  auto id = pre_fault.find_link(scenario.removed->key);
  if (!id) throw Error(Errc::UnknownLink, scenario.key());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& links = pre_fault_paths.paths[i].links;
    out[i] = std::find(links.begin(), links.end(), *id) != links.end();
  }
  return out;
}

std::vector<double> pair_loss(const PathTable& paths, std::span<const double> loads, const Topology& topology,
                              std::span<const char> disrupted, const SimConfig& config) {
  std::vector<double> link_survival(topology.link_count(), 1.0);
  for (std::size_t l = 0; l < link_survival.size(); ++l) {
    const double load = loads[l];
    const double cap = topology.link(l).capacity_mbps;
    if (load > cap) link_survival[l] = 1.0 - (load - cap) / load;
  }
  const double transient =
      std::clamp(config.reconvergence_time_ms / config.measurement_interval_ms, 0.0, 1.0);
  std::vector<double> loss(paths.paths.size());
  for (std::size_t i = 0; i < loss.size(); ++i) {
    double survival = 1.0;
    for (std::size_t l : paths.paths[i].links) survival *= link_survival[l];
    if (!disrupted.empty() && disrupted[i]) survival *= 1.0 - transient;
    loss[i] = std::clamp(1.0 - survival, 0.0, 1.0);
  }
  return loss;
}

FeatureVector simulate(const Topology& topology, const DemandMatrix& demands, const FaultScenario& scenario,
                       const SimConfig& config) {
  const std::size_t V = topology.node_count();
  if (demands.node_count() != V) throw Error(Errc::DimensionMismatch, "demand matrix size");
  const Topology faulted = apply_fault(topology, scenario);
  const PathTable paths = shortest_paths(faulted);
  const auto loads = link_loads(paths, demands, faulted.link_count());
  const auto delays = pair_delay(paths, loads, faulted, config);
  std::vector<char> disrupted;
  if (scenario.removed) disrupted = disrupted_pairs(shortest_paths(topology), topology, scenario);
  const auto losses = pair_loss(paths, loads, faulted, disrupted, config);

  const std::size_t N = pair_count(V);
  FeatureVector fv;
  fv.V = V;
  fv.label = scenario;
  fv.values.resize(3 * N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto [s, d] = pair_at(V, i);
    fv.values[i] = demands(s, d);
    fv.values[N + i] = delays[i];
    fv.values[2 * N + i] = losses[i];
  }
  return fv;
}

void add_measurement_noise(FeatureVector& features, double std_fraction, std::uint64_t seed) {
  if (std_fraction <= 0.0) return;
  const std::size_t N = pair_count(features.V);
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, std_fraction);
  auto& v = features.values;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double clean = v[i];
    double noisy = clean * (1.0 + gauss(rng));
    if (i < N) {
      noisy = std::max(noisy, 0.0);
    } else if (i < 2 * N) {
      noisy = std::max(noisy, 1e-3 * clean);
    } else {
      noisy = std::clamp(noisy, 0.0, 1.0);
    }
    v[i] = noisy;
  }
}

FeatureVector measure(const Topology& topology, const DemandMatrix& demands, const FaultScenario& scenario,
                      const SimConfig& config, std::uint64_t seed) {
  FeatureVector fv = simulate(topology, demands, scenario, config);
  add_measurement_noise(fv, config.noise_std_fraction, seed);
  return fv;
}

std::vector<FeatureVector> measure_batch_serial(const Topology& topology, const DemandMatrix& demands,
                                                std::span<const FaultScenario> scenarios,
                                                std::span<const MeasureJob> jobs, const SimConfig& config) {
  std::vector<FeatureVector> out;
  out.reserve(jobs.size());
  for (const auto& job : jobs) out.push_back(measure(topology, demands, scenarios[job.scenario], config, job.seed));
  return out;
}

std::vector<FeatureVector> measure_batch(const Topology& topology, const DemandMatrix& demands,
                                         std::span<const FaultScenario> scenarios, std::span<const MeasureJob> jobs,
                                         const SimConfig& config) {
  std::vector<std::size_t> used;
  for (const auto& job : jobs) used.push_back(job.scenario);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());

  std::vector<FeatureVector> clean(scenarios.size());
  const auto n_used = static_cast<std::ptrdiff_t>(used.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n_used; ++i) {
    const std::size_t s = used[static_cast<std::size_t>(i)];
    clean[s] = simulate(topology, demands, scenarios[s], config);
  }

  std::vector<FeatureVector> out(jobs.size());
  const auto n_jobs = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n_jobs; ++j) {
    const auto& job = jobs[static_cast<std::size_t>(j)];
    FeatureVector fv = clean[job.scenario];
    add_measurement_noise(fv, config.noise_std_fraction, job.seed);
    out[static_cast<std::size_t>(j)] = std::move(fv);
  }
  return out;
}

std::vector<double> monitor_rtts(const Topology& topology, const PathTable& paths, std::span<const double> loads,
                                 const SimConfig& config, NodeId monitor) {
  const std::size_t V = topology.node_count();
  const auto per_link = link_delays(loads, topology, config);
  std::vector<double> rtt(V, 0.0);
  for (NodeId d = 0; d < V; ++d) {
    if (d == monitor) continue;
    double sum = 0.0;
    for (std::size_t l : paths.at(monitor, d).links) sum += per_link[l];
    for (std::size_t l : paths.at(d, monitor).links) sum += per_link[l];
    rtt[d] = sum;
  }
  return rtt;
}

double simulate_probe_sweep(const Topology& topology, const SimConfig& config, std::span<const double> loads,
                            NodeId monitor) {
  const PathTable paths = shortest_paths(topology);
  const auto rtt = monitor_rtts(topology, paths, loads, config, monitor);
  double total = 0.0;
  for (NodeId d = 0; d < topology.node_count(); ++d)
    if (d != monitor) total += rtt[d] + config.probe_overhead_us;
  return total;
}

}  // namespace lfil
