#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lfil {

struct ForestConfig {
  int trees = 100;
  int max_depth = 20;
  int min_samples_leaf = 1;
  int features_per_split = 0;  // 0 => ceil(sqrt(F))
  std::uint64_t seed = 1;
};

// Array-encoded CART tree. Internal nodes route x[feature] <= threshold to
// `left`; leaves hold per-class sample counts.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1;  // row in the counts table
  };

  // Gini-impurity tree on the given sample indices (with repetition for
  // bootstrap samples). Labels are dense class indices in [0, classes).
  static DecisionTree fit(const Eigen::MatrixXd& X, std::span<const int> y, int classes,
                          std::span<const std::size_t> samples, const ForestConfig& config, std::uint64_t seed);

  // Dense class index; ties go to the lowest index.
  int predict(std::span<const double> row) const;
  std::span<const int> leaf_counts(std::span<const double> row) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const { return classes_ ? counts_.size() / static_cast<std::size_t>(classes_) : 0; }
  int depth() const;
  const std::vector<Node>& nodes() const { return nodes_; }

  nlohmann::json to_json() const;
  static DecisionTree from_json(const nlohmann::json& j, int classes);

 private:
  int classes_ = 0;
  std::vector<Node> nodes_;
  std::vector<int> counts_;
};

class RandomForest {
 public:
  // Bootstrap sample and tree i use seeds derived from (seed, i), so the
  // parallel and serial fits produce identical forests.
  static RandomForest fit(const Eigen::MatrixXd& X, std::span<const int> labels, const ForestConfig& config);
  static RandomForest fit_serial(const Eigen::MatrixXd& X, std::span<const int> labels, const ForestConfig& config);

  // Mode of tree votes; ties go to the lowest class id.
  int predict_one(std::span<const double> row) const;
  std::vector<int> predict(const Eigen::MatrixXd& X) const;

  const std::vector<int>& classes() const { return classes_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestConfig& config() const { return config_; }
  std::size_t input_dim() const { return input_dim_; }

  nlohmann::json to_json() const;
  static RandomForest from_json(const nlohmann::json& j);

 private:
  static RandomForest prepare(const Eigen::MatrixXd& X, std::span<const int> labels, const ForestConfig& config,
                              std::vector<int>& dense);

  std::vector<int> classes_;
  std::vector<DecisionTree> trees_;
  ForestConfig config_;
  std::size_t input_dim_ = 0;
};

}  // namespace lfil
