#pragma once

#include "lfil/error.hpp"
#include "lfil/experiment.hpp"
#include "lfil/rng.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace test {

// Error code thrown by fn, or nullopt when it returns normally.
template <typename Fn>
std::optional<lfil::Errc> code_of(Fn&& fn) {
  try {
    fn();
  } catch (const lfil::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::string data_path(const std::string& name) { return std::string(LFIL_DATA_DIR) + "/" + name; }

inline lfil::Topology load(const std::string& name) {
  return lfil::load_edge_list(lfil::read_file(data_path(name)));
}

inline lfil::Topology triangle() { return lfil::load_edge_list("0 1 300 50\n1 2 300 50\n2 0 300 50\n"); }

// Plain adjacency sets built from the link list, independent of Topology's
// own adjacency.
inline std::vector<std::set<std::size_t>> adjacency(std::size_t V, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::set<std::size_t>> adj(V);
  for (auto [a, b] : edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  return adj;
}

inline std::vector<std::pair<std::size_t, std::size_t>> edges_of(const lfil::Topology& t) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (const auto& l : t.links()) e.emplace_back(l.key.u, l.key.v);
  return e;
}

inline std::size_t reached_by_bfs(std::size_t V, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  if (V == 0) return 0;
  const auto adj = adjacency(V, edges);
  std::vector<char> seen(V, 0);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = 1;
  std::size_t n = 1;
  while (!q.empty()) {
    auto x = q.front();
    q.pop();
    for (auto y : adj[x])
      if (!seen[y]) {
        seen[y] = 1;
        ++n;
        q.push(y);
      }
  }
  return n;
}

// Bridges by deletion: an edge is a bridge iff removing it disconnects.
inline std::vector<std::size_t> removable_by_deletion(const lfil::Topology& t) {
  const auto edges = edges_of(t);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    auto rest = edges;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
    if (reached_by_bfs(t.node_count(), rest) == t.node_count()) out.push_back(i);
  }
  return out;
}

// Unit-weight Dijkstra with a binary heap.
inline std::vector<std::size_t> dijkstra_hops(const lfil::Topology& t, std::size_t src) {
  const auto adj = adjacency(t.node_count(), edges_of(t));
  const auto inf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(t.node_count(), inf);
  using Item = std::pair<std::size_t, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0;
  pq.emplace(0, src);
  while (!pq.empty()) {
    auto [d, x] = pq.top();
    pq.pop();
    if (d > dist[x]) continue;
    for (auto y : adj[x])
      if (d + 1 < dist[y]) {
        dist[y] = d + 1;
        pq.emplace(d + 1, y);
      }
  }
  return dist;
}

// Lexicographically smallest among all hop-minimal node sequences, by
// exhaustive depth-first enumeration.
inline std::vector<std::size_t> smallest_shortest_path(const lfil::Topology& t, std::size_t s, std::size_t d) {
  const auto adj = adjacency(t.node_count(), edges_of(t));
  const auto to_d = dijkstra_hops(t, d);
  std::vector<std::vector<std::size_t>> all;
  std::vector<std::size_t> cur{s};
  auto dfs = [&](auto&& self, std::size_t x) -> void {
    if (x == d) {
      all.push_back(cur);
      return;
    }
    for (auto y : adj[x])
      if (to_d[y] + 1 == to_d[x]) {
        cur.push_back(y);
        self(self, y);
        cur.pop_back();
      }
  };
  dfs(dfs, s);
  return *std::min_element(all.begin(), all.end());
}

// Pairwise distinct random labels for 2-D blobs around class centers.
struct Blobs {
  Eigen::MatrixXd X;
  std::vector<int> y;
};

inline Blobs blobs(int classes, int per_class, double spread, std::uint64_t seed, int dims = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, spread);
  Blobs b;
  b.X.resize(classes * per_class, dims);
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      for (int k = 0; k < dims; ++k) b.X(r, k) = 4.0 * ((c >> k) & 1 ? 1 : -1) + (k == 0 ? c : 0) + n(rng);
      b.y.push_back(c);
    }
  return b;
}

inline double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

}  // namespace test

namespace test {

struct GradientCheck {
  double max_relative_error = 0.0;  // worst tensor
  std::size_t checked = 0;
};

// Central differences against Mlp::loss_and_gradient for up to `per_tensor`
// sampled entries of every weight matrix and bias vector. Each tensor scores
// ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖) over its sampled entries;
// per-entry ratios are dominated by rounding when a gradient is ~1e-7.
inline GradientCheck gradient_check(lfil::Mlp net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& T, double l2,
                                    std::size_t per_tensor, std::uint64_t seed, double h = 1e-5) {
  lfil::MlpGradients g;
  net.loss_and_gradient(X, T, l2, g);
  std::mt19937_64 rng(seed);
  GradientCheck out;
  auto numeric = [&](double& param) {
    const double saved = param;
    param = saved + h;
    const double up = net.loss(X, T, l2);
    param = saved - h;
    const double down = net.loss(X, T, l2);
    param = saved;
    return (up - down) / (2.0 * h);
  };
  auto check = [&](double* params, const double* analytic, std::size_t size) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t k = 0; k < std::min(per_tensor, size); ++k) {
      const std::size_t idx = size <= per_tensor ? k : rng() % size;
      const double n = numeric(params[idx]);
      diff += (analytic[idx] - n) * (analytic[idx] - n);
      na += analytic[idx] * analytic[idx];
      nn += n * n;
      ++out.checked;
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    out.max_relative_error = std::max(out.max_relative_error, std::sqrt(diff) / denom);
  };
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    auto& W = net.weights()[l];
    auto& b = net.biases()[l];
    check(W.data(), g.weights[l].data(), static_cast<std::size_t>(W.size()));
    check(b.data(), g.biases[l].data(), static_cast<std::size_t>(b.size()));
  }
  return out;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = g(rng);
  return M;
}

inline Eigen::MatrixXd one_hot(std::span<const int> labels, int classes) {
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) Y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return Y;
}

}  // namespace test

namespace test {

// Row-by-row counters, kept independent of ConfusionMatrix.
struct OracleScores {
  double macro_p = 0, macro_r = 0, macro_f1 = 0, micro_p = 0, micro_r = 0, micro_f1 = 0, accuracy = 0;
  std::vector<int> involved;
};

inline OracleScores oracle_scores(const std::vector<int>& truth, const std::vector<int>& pred, int K) {
  std::vector<long> tp(K, 0), fp(K, 0), fn(K, 0), seen(K, 0);
  long hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    seen[truth[i]] = seen[pred[i]] = 1;
    if (truth[i] == pred[i]) {
      ++tp[truth[i]];
      ++hits;
    } else {
      ++fp[pred[i]];
      ++fn[truth[i]];
    }
  }
  OracleScores o;
  long TP = 0, FP = 0, FN = 0;
  for (int k = 0; k < K; ++k) {
    if (!seen[k]) continue;
    o.involved.push_back(k);
    const double p = tp[k] + fp[k] ? double(tp[k]) / double(tp[k] + fp[k]) : 0.0;
    const double r = tp[k] + fn[k] ? double(tp[k]) / double(tp[k] + fn[k]) : 0.0;
    o.macro_p += p;
    o.macro_r += r;
    o.macro_f1 += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    TP += tp[k];
    FP += fp[k];
    FN += fn[k];
  }
  const double m = double(o.involved.size());
  if (m > 0) {
    o.macro_p /= m;
    o.macro_r /= m;
    o.macro_f1 /= m;
  }
  o.micro_p = TP + FP ? double(TP) / double(TP + FP) : 0.0;
  o.micro_r = TP + FN ? double(TP) / double(TP + FN) : 0.0;
  o.micro_f1 = o.micro_p + o.micro_r > 0 ? 2 * o.micro_p * o.micro_r / (o.micro_p + o.micro_r) : 0.0;
  o.accuracy = truth.empty() ? 0.0 : double(hits) / double(truth.size());
  return o;
}

// Two-pass R² in extended precision.
inline double oracle_r2(const std::vector<double>& pred, const std::vector<double>& actual) {
  long double mean = 0;
  for (double a : actual) mean += a;
  mean /= static_cast<long double>(actual.size());
  long double res = 0, tot = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    res += (static_cast<long double>(actual[i]) - pred[i]) * (static_cast<long double>(actual[i]) - pred[i]);
    tot += (actual[i] - mean) * (actual[i] - mean);
  }
  return static_cast<double>(1.0L - res / tot);
}

struct LabelPair {
  std::vector<int> truth, pred;
  int K = 0;
};

// Random evaluation: some classes never predicted, some never true.
inline LabelPair random_labels(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabelPair lp;
  lp.K = 2 + static_cast<int>(rng() % 19);
  const std::size_t n = 1 + rng() % 400;
  const double skill = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const int dead_true = static_cast<int>(rng() % static_cast<std::uint64_t>(lp.K));
  for (std::size_t i = 0; i < n; ++i) {
    int t = static_cast<int>(rng() % static_cast<std::uint64_t>(lp.K));
    if (t == dead_true) t = (t + 1) % lp.K;
    const bool right = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < skill;
    lp.truth.push_back(t);
    lp.pred.push_back(right ? t : static_cast<int>(rng() % static_cast<std::uint64_t>(lp.K)));
  }
  return lp;
}

}  // namespace test
