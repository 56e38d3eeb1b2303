#include "lfil/topology.hpp"

#include "lfil/error.hpp"
#include "lfil/rng.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace lfil {

double length_for_delay_us(double delay_us) { return delay_us * 1e-6 * kPropagationSpeedMps; }

namespace {

std::string key_text(LinkKey k) { return std::to_string(k.u) + "-" + std::to_string(k.v); }

bool bfs_reaches_all(std::size_t n, const std::vector<std::vector<Topology::Adjacent>>& adj,
                     std::optional<std::size_t> skip_link = std::nullopt) {
  if (n == 0) return true;
  std::vector<char> seen(n, 0);
  std::queue<NodeId> q;
  q.push(0);
  seen[0] = 1;
  std::size_t reached = 1;
  while (!q.empty()) {
    NodeId x = q.front();
    q.pop();
    for (const auto& a : adj[x]) {
      if (skip_link && a.link == *skip_link) continue;
      if (!seen[a.node]) {
        seen[a.node] = 1;
        ++reached;
        q.push(a.node);
      }
    }
  }
  return reached == n;
}

}  // namespace

Topology Topology::create(std::size_t node_count, std::vector<Link> links, bool require_connected) {
  Topology t;
  t.node_count_ = node_count;
  t.adjacency_.assign(node_count, {});
  std::set<LinkKey> seen;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    if (l.key.u == l.key.v)
      throw Error(Errc::ValidationError, "self-loop at node " + std::to_string(l.key.u));
    if (l.key.v >= node_count)
      throw Error(Errc::ValidationError, "link " + key_text(l.key) + " references unknown node");
    if (!(l.capacity_mbps > 0.0) || !std::isfinite(l.capacity_mbps))
      throw Error(Errc::ValidationError, "link " + key_text(l.key) + " has non-positive capacity");
    if (!(l.length_m > 0.0) || !std::isfinite(l.length_m))
      throw Error(Errc::ValidationError, "link " + key_text(l.key) + " has non-positive length");
    if (!seen.insert(l.key).second)
      throw Error(Errc::ValidationError, "duplicate link " + key_text(l.key));
    t.adjacency_[l.key.u].push_back({l.key.v, i});
    t.adjacency_[l.key.v].push_back({l.key.u, i});
  }
  for (auto& a : t.adjacency_)
    std::sort(a.begin(), a.end(), [](const Adjacent& x, const Adjacent& y) { return x.node < y.node; });
  t.links_ = std::move(links);
  if (require_connected && !t.is_connected())
    throw Error(Errc::ValidationError, "topology is not connected");
  return t;
}

std::optional<std::size_t> Topology::find_link(LinkKey key) const {
  if (key.u >= node_count_) return std::nullopt;
  for (const auto& a : adjacency_[key.u])
    if (a.node == key.v) return a.link;
  return std::nullopt;
}

bool Topology::is_connected() const { return bfs_reaches_all(node_count_, adjacency_); }

std::vector<std::size_t> Topology::degrees() const {
  std::vector<std::size_t> d(node_count_);
  for (std::size_t i = 0; i < node_count_; ++i) d[i] = adjacency_[i].size();
  return d;
}

std::string Topology::canonical_text() const {
  std::vector<Link> sorted = links_;
  std::sort(sorted.begin(), sorted.end(), [](const Link& a, const Link& b) { return a.key < b.key; });
  std::string out = "V " + std::to_string(node_count_) + "\n";
  char buf[128];
  for (const auto& l : sorted) {
    std::snprintf(buf, sizeof buf, "%u %u %.17g %.17g\n", l.key.u, l.key.v, l.capacity_mbps, l.length_m);
    out += buf;
  }
  return out;
}

std::string Topology::fingerprint() const { return fingerprint_hex(canonical_text()); }

bool operator==(const Topology& a, const Topology& b) {
  return a.node_count_ == b.node_count_ && a.canonical_text() == b.canonical_text();
}

const char* to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::NoFault: return "NoFault";
    case FaultKind::Disconnection: return "Disconnection";
    case FaultKind::Reconnection: return "Reconnection";
  }
  return "?";
}

FaultScenario FaultScenario::disconnection(const Link& removed) {
  FaultScenario s;
  s.kind = FaultKind::Disconnection;
  s.removed = removed;
  return s;
}

FaultScenario FaultScenario::reconnection(const Link& removed, const Link& added) {
  FaultScenario s;
  s.kind = FaultKind::Reconnection;
  s.removed = removed;
  s.added = added;
  return s;
}

std::optional<NodeId> FaultScenario::source() const {
  if (!removed || !added) return std::nullopt;
  if (added->key.contains(removed->key.u)) return removed->key.u;
  if (added->key.contains(removed->key.v)) return removed->key.v;
  return std::nullopt;
}

void FaultScenario::validate() const {
  switch (kind) {
    case FaultKind::NoFault:
      if (removed || added) throw Error(Errc::InvalidScenario, "NoFault carries links");
      return;
    case FaultKind::Disconnection:
      if (!removed || added) throw Error(Errc::InvalidScenario, "Disconnection needs exactly a removed link");
      return;
    case FaultKind::Reconnection:
      if (!removed || !added) throw Error(Errc::InvalidScenario, "Reconnection needs removed and added links");
      if (removed->key == added->key) throw Error(Errc::InvalidScenario, "removed and added links coincide");
      if (!source()) throw Error(Errc::InvalidScenario, "added link does not share the removed link's source");
      return;
  }
}

std::string FaultScenario::key() const {
  switch (kind) {
    case FaultKind::NoFault: return "none";
    case FaultKind::Disconnection: return "d:" + key_text(removed->key);
    case FaultKind::Reconnection: return "r:" + key_text(removed->key) + ">" + key_text(added->key);
  }
  return "?";
}

Topology generate_small_world(const SmallWorldParams& params) {
  const std::size_t n = params.nodes;
  const std::size_t k = params.k;
  if (k < 2 || k % 2 != 0 || k >= n)
    throw Error(Errc::InvalidParams, "small-world requires n > k >= 2 with k even");
  if (!(params.p >= 0.0 && params.p <= 1.0)) throw Error(Errc::InvalidParams, "p must lie in [0, 1]");
  if (!(params.min_length_m > 0.0) || params.max_length_m < params.min_length_m)
    throw Error(Errc::InvalidParams, "invalid length range");

  constexpr int kMaxAttempts = 16;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_seed(params.seed, 0x5157, static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_real_distribution<double> length(params.min_length_m, params.max_length_m);

    std::set<LinkKey> keys;
    std::vector<LinkKey> order;
    auto add = [&](NodeId a, NodeId b) {
      LinkKey key(a, b);
      if (keys.insert(key).second) order.push_back(key);
    };
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 1; j <= k / 2; ++j) add(static_cast<NodeId>(i), static_cast<NodeId>((i + j) % n));

    for (std::size_t i = 0; i < n; ++i) {
      if (coin(rng) >= params.p) continue;
      std::vector<NodeId> candidates;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && !keys.count(LinkKey(static_cast<NodeId>(i), static_cast<NodeId>(j))))
          candidates.push_back(static_cast<NodeId>(j));
      if (candidates.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      add(static_cast<NodeId>(i), candidates[pick(rng)]);
    }

    std::vector<Link> links;
    links.reserve(order.size());
    for (const auto& key : order) links.push_back({key, params.capacity_mbps, length(rng)});
    Topology t = Topology::create(n, std::move(links), false);
    if (t.is_connected()) return t;
  }
  throw Error(Errc::ConnectivityFailure, "no connected small-world graph within retry budget");
}

namespace {

template <typename T>
bool parse_number(std::string_view token, T& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Topology load_edge_list(std::string_view text) {
  std::vector<Link> links;
  std::size_t max_id = 0;
  std::set<NodeId> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) tokens.push_back(line.substr(i, j - i));
      i = j;
    }
    if (tokens.empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": " + why);
    };
    if (tokens.size() != 4) fail("expected '<u> <v> <capacity_mbps> <length_m>'");
    NodeId u = 0, v = 0;
    double cap = 0.0, len = 0.0;
    if (!parse_number(tokens[0], u) || !parse_number(tokens[1], v)) fail("bad node id");
    if (!parse_number(tokens[2], cap) || !parse_number(tokens[3], len)) fail("bad number");
    if (u == v)
      throw Error(Errc::ValidationError, "line " + std::to_string(line_no) + ": self-loop at node " +
                                             std::to_string(u));
    links.push_back({LinkKey(u, v), cap, len});
    ids.insert(u);
    ids.insert(v);
    max_id = std::max<std::size_t>(max_id, std::max(u, v));
    if (end == text.size()) break;
  }
  if (links.empty()) throw Error(Errc::ValidationError, "edge list has no links");
  if (ids.size() != max_id + 1) throw Error(Errc::ValidationError, "node ids are not contiguous from 0");
  return Topology::create(max_id + 1, std::move(links));
}

std::string to_edge_list(const Topology& topology) {
  std::string out = "# u v capacity_mbps length_m\n";
  char buf[128];
  for (const auto& l : topology.links()) {
    std::snprintf(buf, sizeof buf, "%u %u %.17g %.17g\n", l.key.u, l.key.v, l.capacity_mbps, l.length_m);
    out += buf;
  }
  return out;
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double great_circle_m(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusM = 6371.0e3;
  const double to_rad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * to_rad;
  const double dlon = (lon2 - lon1) * to_rad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * to_rad) * std::cos(lat2 * to_rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

}  // namespace

Topology load_graphml(std::string_view text, const GraphmlOptions& options) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    std::istringstream in{std::string(text)};
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw Error(Errc::ParseError, std::string("GraphML: ") + e.what());
  }
  auto root = doc.get_child_optional("graphml");
  if (!root) throw Error(Errc::ParseError, "GraphML: missing <graphml> root");

  std::string lat_key, lon_key;
  for (const auto& [tag, child] : *root) {
    if (tag != "key") continue;
    const std::string name = lower(child.get<std::string>(pt::ptree::path_type("<xmlattr>/attr.name", '/'), ""));
    const std::string id = child.get<std::string>("<xmlattr>.id", "");
    const std::string domain = child.get<std::string>("<xmlattr>.for", "node");
    if (domain != "node" && domain != "all") continue;
    if (name == "latitude") lat_key = id;
    if (name == "longitude") lon_key = id;
  }

  auto graph = root->get_child_optional("graph");
  if (!graph) throw Error(Errc::ParseError, "GraphML: missing <graph>");

  struct Coord {
    std::optional<double> lat, lon;
  };
  std::map<std::string, NodeId> index;
  std::vector<Coord> coords;
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& [tag, child] : *graph) {
    if (tag == "node") {
      const std::string id = child.get<std::string>("<xmlattr>.id", "");
      if (id.empty()) throw Error(Errc::ParseError, "GraphML: node without id");
      if (index.count(id)) throw Error(Errc::ParseError, "GraphML: duplicate node id " + id);
      Coord c;
      for (const auto& [dtag, data] : child) {
        if (dtag != "data") continue;
        const std::string key = data.get<std::string>("<xmlattr>.key", "");
        double value = 0.0;
        std::string raw = data.get_value<std::string>();
        try {
          value = std::stod(raw);
        } catch (...) {
          continue;
        }
        if (!lat_key.empty() && key == lat_key) c.lat = value;
        if (!lon_key.empty() && key == lon_key) c.lon = value;
      }
      index.emplace(id, static_cast<NodeId>(coords.size()));
      coords.push_back(c);
    } else if (tag == "edge") {
      edges.emplace_back(child.get<std::string>("<xmlattr>.source", ""),
                         child.get<std::string>("<xmlattr>.target", ""));
    }
  }

  std::vector<Link> links;
  std::set<LinkKey> seen;
  for (const auto& [s, t] : edges) {
    auto is = index.find(s);
    auto it = index.find(t);
    if (is == index.end() || it == index.end())
      throw Error(Errc::ParseError, "GraphML: edge references unknown node " + s + "->" + t);
    LinkKey key(is->second, it->second);
    if (key.u == key.v) throw Error(Errc::ValidationError, "GraphML: self-loop at node " + s);
    // Parallel edges collapse into one link.
    if (!seen.insert(key).second) continue;
    const Coord& a = coords[key.u];
    const Coord& b = coords[key.v];
    double length = options.default_length_m;
    if (a.lat && a.lon && b.lat && b.lon) {
      length = great_circle_m(*a.lat, *a.lon, *b.lat, *b.lon);
      // Co-located nodes still need a positive delay.
      if (length < 1.0) length = 1.0;
    } else if (options.strict_geo) {
      throw Error(Errc::MissingCoordinates, "GraphML: node without coordinates on edge " + s + "-" + t);
    }
    links.push_back({key, options.capacity_mbps, length});
  }
  return Topology::create(coords.size(), std::move(links));
}

Topology apply_fault(const Topology& topology, const FaultScenario& scenario) {
  scenario.validate();
  std::vector<Link> links = topology.links();
  if (scenario.kind == FaultKind::NoFault) return Topology::create(topology.node_count(), std::move(links));

  const LinkKey removed = scenario.removed->key;
  auto idx = topology.find_link(removed);
  if (!idx) throw Error(Errc::UnknownLink, "no link " + key_text(removed));
  links.erase(links.begin() + static_cast<std::ptrdiff_t>(*idx));
  if (scenario.added) {
    const LinkKey added = scenario.added->key;
    if (topology.find_link(added)) throw Error(Errc::DuplicateLink, "link " + key_text(added) + " exists");
    if (added.v >= topology.node_count()) throw Error(Errc::UnknownLink, "link " + key_text(added) + " out of range");
    links.push_back(*scenario.added);
  }
  Topology out = Topology::create(topology.node_count(), std::move(links), false);
  if (!out.is_connected()) throw Error(Errc::DisconnectsGraph, scenario.key() + " partitions the graph");
  return out;
}

std::vector<std::size_t> removable_links(const Topology& topology) {
  // Tarjan bridge finding, iterative DFS with parent-edge skipping.
  const std::size_t n = topology.node_count();
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<char> bridge(topology.link_count(), 0);
  int timer = 0;
  struct Frame {
    NodeId node;
    std::size_t parent_link;
    std::size_t next;
  };
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  for (NodeId root = 0; root < n; ++root) {
    if (disc[root] >= 0) continue;
    std::vector<Frame> stack{{root, kNone, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto& adj = topology.neighbors(f.node);
      if (f.next < adj.size()) {
        const auto a = adj[f.next++];
        if (a.link == f.parent_link) continue;
        if (disc[a.node] < 0) {
          disc[a.node] = low[a.node] = timer++;
          stack.push_back({a.node, a.link, 0});
        } else {
          low[f.node] = std::min(low[f.node], disc[a.node]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          Frame& parent = stack.back();
          low[parent.node] = std::min(low[parent.node], low[done.node]);
          if (low[done.node] > disc[parent.node]) bridge[done.parent_link] = 1;
        }
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < topology.link_count(); ++i)
    if (!bridge[i]) out.push_back(i);
  return out;
}

std::vector<FaultScenario> enumerate_scenarios(const Topology& topology, ScenarioKinds kinds,
                                               std::uint64_t seed) {
  std::vector<FaultScenario> out;
  if (kinds.no_fault) out.push_back(FaultScenario::none());
  const auto removable = removable_links(topology);
  if (kinds.disconnection)
    for (std::size_t id : removable) out.push_back(FaultScenario::disconnection(topology.link(id)));
  if (kinds.reconnection) {
    for (std::size_t id : removable) {
      const Link& removed = topology.link(id);
      for (NodeId src : {removed.key.u, removed.key.v}) {
        const NodeId far = removed.key.other(src);
        for (NodeId w = 0; w < topology.node_count(); ++w) {
          if (w == src || w == far) continue;
          LinkKey key(src, w);
          if (topology.find_link(key)) continue;
          Rng rng(derive_seed(seed, id, (static_cast<std::uint64_t>(key.u) << 32) | key.v));
          std::uniform_real_distribution<double> length(20.0, 100.0);
          out.push_back(FaultScenario::reconnection(removed, Link{key, removed.capacity_mbps, length(rng)}));
        }
      }
    }
  }
  return out;
}

}  // namespace lfil
