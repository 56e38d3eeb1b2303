#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lfil {

struct SvmConfig {
  double learning_rate = 0.05;
  int epochs = 60;
  int batch_size = 32;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
};

// One-vs-rest linear SVM; each hyperplane minimizes
// 0.5·l2·‖w‖² + mean hinge(1 − y·(w·x + b)) by mini-batch sub-gradient descent.
class LinearSvm {
 public:
  static LinearSvm fit(const Eigen::MatrixXd& X, std::span<const int> labels, const SvmConfig& config);

  // n × K decision values w_k·x + b_k.
  Eigen::MatrixXd decision_values(const Eigen::MatrixXd& X) const;
  int predict_one(std::span<const double> row) const;
  std::vector<int> predict(const Eigen::MatrixXd& X) const;

  const std::vector<int>& classes() const { return classes_; }
  const Eigen::MatrixXd& weights() const { return W_; }
  const Eigen::VectorXd& biases() const { return b_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(W_.rows()); }

  nlohmann::json to_json() const;
  static LinearSvm from_json(const nlohmann::json& j);

 private:
  std::vector<int> classes_;
  Eigen::MatrixXd W_;  // F × K
  Eigen::VectorXd b_;
};

}  // namespace lfil
