#pragma once

#include "lfil/flowsim.hpp"
#include "lfil/topology.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lfil {

struct ProbeReport {
  std::vector<double> rtt_us;   // indexed by destination; 0 for the monitor
  std::vector<char> reachable;  // indexed by destination
  double probe_time_us = 0.0;     // Σ RTT + per-probe overhead
  double analysis_time_us = 0.0;  // measured wall time of the localizer

  double total_time_us() const { return probe_time_us + analysis_time_us; }
};

struct BaselineOptions {
  NodeId monitor = 0;
  // Multiplicative Gaussian noise on observed RTTs; pings are exact by default.
  double rtt_noise_std_fraction = 0.0;
  std::uint64_t seed = 1;
};

struct CandidateSignature {
  std::size_t link;          // id in the reference topology
  std::vector<double> rtt;   // expected monitor RTTs with the link removed
};

// Expected RTT vectors for every removable link of the reference under the
// given demands. The parallel variant returns the same vectors.
std::vector<CandidateSignature> candidate_signatures_serial(const Topology& reference, const DemandMatrix& demands,
                                                            const SimConfig& config, NodeId monitor);
std::vector<CandidateSignature> candidate_signatures(const Topology& reference, const DemandMatrix& demands,
                                                     const SimConfig& config, NodeId monitor);

// Candidate minimizing the squared RTT distance over reachable
// destinations; ties go to the lowest link id.
std::size_t best_candidate(std::span<const CandidateSignature> candidates, std::span<const double> observed,
                           std::span<const char> reachable);

struct BaselineResult {
  std::size_t predicted_link = 0;  // id in the reference topology
  LinkKey predicted_key;
  ProbeReport report;
};

// Pings every node from the monitor on the faulty network, then matches the
// observed RTTs against the reference's removal candidates.
BaselineResult probe_and_localize(const Topology& faulty, const Topology& reference, const DemandMatrix& demands,
                                  const SimConfig& config, const BaselineOptions& options = {});

}  // namespace lfil
