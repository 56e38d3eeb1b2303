#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lfil {

using NodeId = std::uint32_t;

// Signal propagation speed used to convert link length to delay.
inline constexpr double kPropagationSpeedMps = 2.0e8;

// Unordered endpoint pair, stored with u < v.
struct LinkKey {
  NodeId u = 0;
  NodeId v = 0;

  LinkKey() = default;
  LinkKey(NodeId a, NodeId b) : u(a < b ? a : b), v(a < b ? b : a) {}

  bool contains(NodeId n) const { return u == n || v == n; }
  NodeId other(NodeId n) const { return n == u ? v : u; }

  friend auto operator<=>(const LinkKey&, const LinkKey&) = default;
};

struct Link {
  LinkKey key;
  double capacity_mbps = 0.0;
  double length_m = 0.0;

  // One-way propagation delay in microseconds.
  double prop_delay_us() const { return length_m / kPropagationSpeedMps * 1e6; }
};

double length_for_delay_us(double delay_us);

// Immutable undirected graph. Link ids are positions in links().
class Topology {
 public:
  struct Adjacent {
    NodeId node;
    std::size_t link;
  };

  // Validates: endpoints in range, no self-loops, no duplicates, positive
  // capacity and length, and (when require_connected) connectivity.
  static Topology create(std::size_t node_count, std::vector<Link> links,
                         bool require_connected = true);

  std::size_t node_count() const { return node_count_; }
  std::size_t link_count() const { return links_.size(); }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(std::size_t id) const { return links_[id]; }
  // Neighbors sorted by node id.
  const std::vector<Adjacent>& neighbors(NodeId n) const { return adjacency_[n]; }

  std::optional<std::size_t> find_link(LinkKey key) const;
  bool is_connected() const;
  std::vector<std::size_t> degrees() const;

  // Canonical edge-list text (sorted by key); basis of the fingerprint.
  std::string canonical_text() const;
  std::string fingerprint() const;

  // Set equality of links; order-insensitive.
  friend bool operator==(const Topology& a, const Topology& b);

 private:
  Topology() = default;

  std::size_t node_count_ = 0;
  std::vector<Link> links_;
  std::vector<std::vector<Adjacent>> adjacency_;
};

enum class FaultKind { NoFault, Disconnection, Reconnection };

const char* to_string(FaultKind kind);

struct FaultScenario {
  FaultKind kind = FaultKind::NoFault;
  std::optional<Link> removed;
  std::optional<Link> added;

  static FaultScenario none() { return {}; }
  static FaultScenario disconnection(const Link& removed);
  static FaultScenario reconnection(const Link& removed, const Link& added);

  // Endpoint shared by removed and added links (reconnections only).
  std::optional<NodeId> source() const;
  // Checks the kind/optional invariants and the shared-source rule.
  void validate() const;
  // Stable text key, e.g. "none", "d:1-2", "r:1-2>1-9".
  std::string key() const;

  friend bool operator==(const FaultScenario& a, const FaultScenario& b) {
    return a.key() == b.key();
  }
};

// Ring lattice with k nearest neighbors per node, then for every node an
// extra edge to a random non-neighbor with probability p. Lengths are drawn
// uniformly from [min_length_m, max_length_m].
struct SmallWorldParams {
  std::size_t nodes = 10;
  std::size_t k = 4;
  double p = 0.0;
  std::uint64_t seed = 1;
  double capacity_mbps = 10000.0;
  double min_length_m = 20.0;
  double max_length_m = 100.0;
};

Topology generate_small_world(const SmallWorldParams& params);

Topology load_edge_list(std::string_view text);
std::string to_edge_list(const Topology& topology);

struct GraphmlOptions {
  double default_length_m = 50.0;
  double capacity_mbps = 10000.0;
  bool strict_geo = false;
};

Topology load_graphml(std::string_view text, const GraphmlOptions& options = {});

// Returns a new topology; the input is unchanged.
Topology apply_fault(const Topology& topology, const FaultScenario& scenario);

// Links whose removal keeps the graph connected, i.e. non-bridges, in id order.
std::vector<std::size_t> removable_links(const Topology& topology);

struct ScenarioKinds {
  bool no_fault = false;
  bool disconnection = false;
  bool reconnection = false;
};

// Deterministic order: NoFault, then disconnections by link id, then
// reconnections by (removed id, source endpoint, added far endpoint).
// Added links copy the removed link's capacity; their length is drawn from
// [20, 100] m with a seed derived from (seed, removed id, added key).
std::vector<FaultScenario> enumerate_scenarios(const Topology& topology, ScenarioKinds kinds,
                                               std::uint64_t seed = 0);

}  // namespace lfil
