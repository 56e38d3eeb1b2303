#include "lfil/forest.hpp"

#include "lfil/error.hpp"
#include "lfil/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lfil {

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, std::span<const int> y, int classes, const ForestConfig& config,
              std::uint64_t seed)
      : X_(X), y_(y), K_(classes), config_(config), rng_(seed) {
    const auto F = static_cast<int>(X.cols());
    mtry_ = config.features_per_split > 0 ? std::min(config.features_per_split, F)
                                          : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(F))));
    mtry_ = std::max(mtry_, 1);
    features_.resize(static_cast<std::size_t>(F));
    std::iota(features_.begin(), features_.end(), 0);
  }

  int build(std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, int depth) {
    std::vector<int> counts(static_cast<std::size_t>(K_), 0);
    for (std::size_t i = begin; i < end; ++i) ++counts[static_cast<std::size_t>(y_[idx[i]])];
    const auto n = static_cast<double>(end - begin);
    const int node_id = static_cast<int>(nodes.size());
    nodes.push_back({});

    const bool pure = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;
    const auto min_leaf = static_cast<std::size_t>(std::max(config_.min_samples_leaf, 1));
    if (pure || depth >= config_.max_depth || end - begin < 2 * min_leaf) return make_leaf(node_id, counts);

    double parent_sq = 0.0;
    for (int c : counts) parent_sq += static_cast<double>(c) * c;
    const double parent_score = parent_sq / n;

    // Partial Fisher-Yates: the first mtry entries become this node's candidates.
    for (int i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), features_.size() - 1);
      std::swap(features_[static_cast<std::size_t>(i)], features_[pick(rng_)]);
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = parent_score + 1e-12;
    std::vector<int> left(static_cast<std::size_t>(K_));
    for (int t = 0; t < mtry_; ++t) {
      const int f = features_[static_cast<std::size_t>(t)];
      buf_.clear();
      for (std::size_t i = begin; i < end; ++i) buf_.emplace_back(X_(static_cast<Eigen::Index>(idx[i]), f), y_[idx[i]]);
      std::sort(buf_.begin(), buf_.end());
      if (buf_.front().first == buf_.back().first) continue;
      std::fill(left.begin(), left.end(), 0);
      double sq_left = 0.0, sq_right = parent_sq;
      for (std::size_t i = 0; i + 1 < buf_.size(); ++i) {
        const auto c = static_cast<std::size_t>(buf_[i].second);
        const int right_c = counts[c] - left[c];
        sq_left += 2.0 * left[c] + 1.0;
        sq_right -= 2.0 * right_c - 1.0;
        ++left[c];
        if (buf_[i].first == buf_[i + 1].first) continue;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = buf_.size() - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double score = sq_left / static_cast<double>(n_left) + sq_right / static_cast<double>(n_right);
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          const double a = buf_[i].first, b = buf_[i + 1].first;
          double mid = a + (b - a) / 2.0;
          if (!(mid < b)) mid = a;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return make_leaf(node_id, counts);

    auto mid_it = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                 idx.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t r) {
                                   return X_(static_cast<Eigen::Index>(r), best_feature) <= best_threshold;
                                 });
    const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
    const int l = build(idx, begin, mid, depth + 1);
    const int r = build(idx, mid, end, depth + 1);
    auto& node = nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return node_id;
  }

  std::vector<DecisionTree::Node> nodes;
  std::vector<int> leaf_counts;

 private:
  int make_leaf(int node_id, const std::vector<int>& counts) {
    auto& node = nodes[static_cast<std::size_t>(node_id)];
    node.leaf = static_cast<int>(leaf_counts.size() / static_cast<std::size_t>(K_));
    leaf_counts.insert(leaf_counts.end(), counts.begin(), counts.end());
    return node_id;
  }

  const Eigen::MatrixXd& X_;
  std::span<const int> y_;
  int K_;
  const ForestConfig& config_;
  Rng rng_;
  int mtry_ = 1;
  std::vector<int> features_;
  std::vector<std::pair<double, int>> buf_;
};

int argmax_lowest(std::span<const int> counts) {
  int best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i)
    if (counts[i] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace

DecisionTree DecisionTree::fit(const Eigen::MatrixXd& X, std::span<const int> y, int classes,
                               std::span<const std::size_t> samples, const ForestConfig& config,
                               std::uint64_t seed) {
  if (samples.empty()) throw Error(Errc::InvalidParams, "tree needs at least one sample");
  TreeBuilder builder(X, y, classes, config, seed);
  std::vector<std::size_t> idx(samples.begin(), samples.end());
  builder.build(idx, 0, idx.size(), 0);
  DecisionTree t;
  t.classes_ = classes;
  t.nodes_ = std::move(builder.nodes);
  t.counts_ = std::move(builder.leaf_counts);
  return t;
}

std::span<const int> DecisionTree::leaf_counts(std::span<const double> row) const {
  int n = 0;
  while (nodes_[static_cast<std::size_t>(n)].feature >= 0) {
    const Node& node = nodes_[static_cast<std::size_t>(n)];
    n = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  const auto leaf = static_cast<std::size_t>(nodes_[static_cast<std::size_t>(n)].leaf);
  return {counts_.data() + leaf * static_cast<std::size_t>(classes_), static_cast<std::size_t>(classes_)};
}

int DecisionTree::predict(std::span<const double> row) const { return argmax_lowest(leaf_counts(row)); }

int DecisionTree::depth() const {
  int deepest = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const Node& node = nodes_[static_cast<std::size_t>(n)];
    if (node.feature >= 0) {
      stack.emplace_back(node.left, d + 1);
      stack.emplace_back(node.right, d + 1);
    }
  }
  return deepest;
}

nlohmann::json DecisionTree::to_json() const {
  std::vector<int> feature, left, right, leaf;
  std::vector<double> threshold;
  for (const auto& n : nodes_) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    leaf.push_back(n.leaf);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},
          {"right", right},     {"leaf", leaf},           {"counts", counts_}};
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j, int classes) {
  DecisionTree t;
  t.classes_ = classes;
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto leaf = j.at("leaf").get<std::vector<int>>();
  t.counts_ = j.at("counts").get<std::vector<int>>();
  const std::size_t n = feature.size();
  if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || leaf.size() != n ||
      classes <= 0 || t.counts_.size() % static_cast<std::size_t>(classes) != 0)
    throw Error(Errc::CorruptModel, "tree arrays disagree");
  const int leaves = static_cast<int>(t.counts_.size() / static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < n; ++i) {
    Node node{feature[i], threshold[i], left[i], right[i], leaf[i]};
    // Children always follow their parent, which rules out cycles.
    if (node.feature >= 0) {
      if (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) || node.left >= static_cast<int>(n) ||
          node.right >= static_cast<int>(n) || !std::isfinite(node.threshold))
        throw Error(Errc::CorruptModel, "bad tree node");
    } else if (node.leaf < 0 || node.leaf >= leaves) {
      throw Error(Errc::CorruptModel, "bad tree leaf");
    }
    t.nodes_.push_back(node);
  }
  return t;
}

RandomForest RandomForest::prepare(const Eigen::MatrixXd& X, std::span<const int> labels, const ForestConfig& config,
                                   std::vector<int>& dense) {
  if (static_cast<std::size_t>(X.rows()) != labels.size()) throw Error(Errc::DimensionMismatch, "rows vs labels");
  if (config.trees < 1 || config.max_depth < 1 || config.min_samples_leaf < 1)
    throw Error(Errc::InvalidParams, "forest config must be positive");
  RandomForest rf;
  rf.config_ = config;
  rf.input_dim_ = static_cast<std::size_t>(X.cols());
  rf.classes_.assign(labels.begin(), labels.end());
  std::sort(rf.classes_.begin(), rf.classes_.end());
  rf.classes_.erase(std::unique(rf.classes_.begin(), rf.classes_.end()), rf.classes_.end());
  if (rf.classes_.size() < 2) throw Error(Errc::SingleClass, "random forest needs at least two classes");
  dense.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    dense[i] = static_cast<int>(std::lower_bound(rf.classes_.begin(), rf.classes_.end(), labels[i]) - rf.classes_.begin());
  rf.trees_.resize(static_cast<std::size_t>(config.trees));
  return rf;
}

namespace {

DecisionTree fit_member(const Eigen::MatrixXd& X, std::span<const int> dense, int K, const ForestConfig& config,
                        std::size_t i) {
  const auto n = static_cast<std::size_t>(X.rows());
  Rng rng(derive_seed(config.seed, i, 0));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> sample(n);
  for (auto& s : sample) s = pick(rng);
  return DecisionTree::fit(X, dense, K, sample, config, derive_seed(config.seed, i, 1));
}

}  // namespace

RandomForest RandomForest::fit(const Eigen::MatrixXd& X, std::span<const int> labels, const ForestConfig& config) {
  std::vector<int> dense;
  RandomForest rf = prepare(X, labels, config, dense);
  const int K = static_cast<int>(rf.classes_.size());
  const auto T = static_cast<std::ptrdiff_t>(rf.trees_.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < T; ++i)
    rf.trees_[static_cast<std::size_t>(i)] = fit_member(X, dense, K, config, static_cast<std::size_t>(i));
  return rf;
}

RandomForest RandomForest::fit_serial(const Eigen::MatrixXd& X, std::span<const int> labels,
                                      const ForestConfig& config) {
  std::vector<int> dense;
  RandomForest rf = prepare(X, labels, config, dense);
  const int K = static_cast<int>(rf.classes_.size());
  for (std::size_t i = 0; i < rf.trees_.size(); ++i) rf.trees_[i] = fit_member(X, dense, K, config, i);
  return rf;
}

int RandomForest::predict_one(std::span<const double> row) const {
  if (row.size() != input_dim_) throw Error(Errc::DimensionMismatch, "forest input width");
  std::vector<int> votes(classes_.size(), 0);
  for (const auto& t : trees_) ++votes[static_cast<std::size_t>(t.predict(row))];
  return classes_[static_cast<std::size_t>(argmax_lowest(votes))];
}

std::vector<int> RandomForest::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != input_dim_) throw Error(Errc::DimensionMismatch, "forest input width");
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  std::vector<double> row(input_dim_);
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (std::size_t f = 0; f < input_dim_; ++f) row[f] = X(r, static_cast<Eigen::Index>(f));
    out[static_cast<std::size_t>(r)] = predict_one(row);
  }
  return out;
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"classes", classes_},
          {"input_dim", input_dim_},
          {"config",
           {{"trees", config_.trees},
            {"max_depth", config_.max_depth},
            {"min_samples_leaf", config_.min_samples_leaf},
            {"features_per_split", config_.features_per_split},
            {"seed", config_.seed}}},
          {"trees", trees}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
  RandomForest rf;
  rf.classes_ = j.at("classes").get<std::vector<int>>();
  rf.input_dim_ = j.at("input_dim").get<std::size_t>();
  const auto& c = j.at("config");
  rf.config_.trees = c.at("trees").get<int>();
  rf.config_.max_depth = c.at("max_depth").get<int>();
  rf.config_.min_samples_leaf = c.at("min_samples_leaf").get<int>();
  rf.config_.features_per_split = c.at("features_per_split").get<int>();
  rf.config_.seed = c.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("trees")) {
    rf.trees_.push_back(DecisionTree::from_json(t, static_cast<int>(rf.classes_.size())));
    for (const auto& node : rf.trees_.back().nodes())
      if (node.feature >= static_cast<int>(rf.input_dim_)) throw Error(Errc::CorruptModel, "feature out of range");
  }
  if (rf.trees_.empty() || rf.classes_.size() < 2) throw Error(Errc::CorruptModel, "empty forest");
  return rf;
}

}  // namespace lfil
