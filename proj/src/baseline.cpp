#include "lfil/baseline.hpp"

#include "lfil/error.hpp"
#include "lfil/rng.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <queue>
#include <random>

namespace lfil {

namespace {

CandidateSignature signature(const Topology& reference, std::size_t link, const DemandMatrix& demands,
                             const SimConfig& config, NodeId monitor) {
  const Topology faulty = apply_fault(reference, FaultScenario::disconnection(reference.link(link)));
  const PathTable paths = shortest_paths(faulty);
  const auto loads = link_loads(paths, demands, faulty.link_count());
  return {link, monitor_rtts(faulty, paths, loads, config, monitor)};
}

std::vector<char> reachable_from(const Topology& t, NodeId monitor) {
  std::vector<char> seen(t.node_count(), 0);
  std::queue<NodeId> q;
  seen[monitor] = 1;
  q.push(monitor);
  while (!q.empty()) {
    const NodeId n = q.front();
    q.pop();
    for (const auto& a : t.neighbors(n))
      if (!seen[a.node]) {
        seen[a.node] = 1;
        q.push(a.node);
      }
  }
  return seen;
}

}  // namespace

std::vector<CandidateSignature> candidate_signatures_serial(const Topology& reference, const DemandMatrix& demands,
                                                            const SimConfig& config, NodeId monitor) {
  std::vector<CandidateSignature> out;
  for (std::size_t l : removable_links(reference)) out.push_back(signature(reference, l, demands, config, monitor));
  return out;
}

std::vector<CandidateSignature> candidate_signatures(const Topology& reference, const DemandMatrix& demands,
                                                     const SimConfig& config, NodeId monitor) {
  const auto links = removable_links(reference);
  std::vector<CandidateSignature> out(links.size());
  const auto n = static_cast<std::ptrdiff_t>(links.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = signature(reference, links[static_cast<std::size_t>(i)], demands, config, monitor);
  return out;
}

std::size_t best_candidate(std::span<const CandidateSignature> candidates, std::span<const double> observed,
                           std::span<const char> reachable) {
  if (candidates.empty()) throw Error(Errc::InvalidParams, "no removable candidate links");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& rtt = candidates[c].rtt;
    if (rtt.size() != observed.size()) throw Error(Errc::DimensionMismatch, "RTT vector length");
    double d = 0.0;
    for (std::size_t i = 0; i < rtt.size(); ++i)
      if (reachable[i]) d += (rtt[i] - observed[i]) * (rtt[i] - observed[i]);
    if (d < best_d || (d == best_d && candidates[c].link < candidates[best].link)) {
      best_d = d;
      best = c;
    }
  }
  return candidates[best].link;
}

BaselineResult probe_and_localize(const Topology& faulty, const Topology& reference, const DemandMatrix& demands,
                                  const SimConfig& config, const BaselineOptions& options) {
  if (faulty.node_count() != reference.node_count() || demands.node_count() != reference.node_count())
    throw Error(Errc::DimensionMismatch, "faulty and reference topologies differ in size");
  if (options.monitor >= reference.node_count()) throw Error(Errc::InvalidParams, "monitor outside the topology");

  BaselineResult out;
  ProbeReport& rep = out.report;
  rep.reachable = reachable_from(faulty, options.monitor);
  const PathTable paths = shortest_paths(faulty);
  const auto loads = link_loads(paths, demands, faulty.link_count());
  rep.rtt_us = monitor_rtts(faulty, paths, loads, config, options.monitor);
  if (options.rtt_noise_std_fraction > 0.0) {
    Rng rng(options.seed);
    std::normal_distribution<double> noise(0.0, options.rtt_noise_std_fraction);
    for (auto& r : rep.rtt_us) r = std::max(r * (1.0 + noise(rng)), 1e-3 * r);
  }
  for (NodeId d = 0; d < faulty.node_count(); ++d)
    if (d != options.monitor) rep.probe_time_us += rep.rtt_us[d] + config.probe_overhead_us;

  const auto start = std::chrono::steady_clock::now();
  const auto candidates = candidate_signatures(reference, demands, config, options.monitor);
  out.predicted_link = best_candidate(candidates, rep.rtt_us, rep.reachable);
  rep.analysis_time_us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  out.predicted_key = reference.link(out.predicted_link).key;
  return out;
}

}  // namespace lfil
