#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lfil {

enum class OutputHead { Softmax, Linear };

struct MlpConfig {
  std::vector<int> hidden{128, 128};
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 100;
  int batch_size = 32;
  double l2 = 1e-4;
  int patience = 10;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct CurvePoint {
  int epoch = 0;
  double loss = 0.0;
  double metric = 0.0;  // validation accuracy (classifier) or R² (regressor)
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Fully connected ReLU network. Rows of X are samples; layer l maps
// A (n × in) to A·W_l + b_l (n × out).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, OutputHead head, std::uint64_t seed);

  // Softmax probabilities or linear outputs.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd forward_one(std::span<const double> x) const;

  // Mean cross-entropy (softmax head, one-hot targets) or 0.5·mean of
  // (ŷ − y)² over every sample and output (linear head), plus 0.5·l2·Σ‖W‖².
  double loss(const Eigen::MatrixXd& X, const Eigen::MatrixXd& targets, double l2) const;
  double loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& targets, double l2,
                           MlpGradients& grads) const;

  const std::vector<int>& layer_sizes() const { return sizes_; }
  OutputHead head() const { return head_; }
  std::vector<Eigen::MatrixXd>& weights() { return W_; }
  std::vector<Eigen::VectorXd>& biases() { return b_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return W_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }
  bool all_finite() const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::vector<int> sizes_;
  OutputHead head_ = OutputHead::Softmax;
  std::vector<Eigen::MatrixXd> W_;
  std::vector<Eigen::VectorXd> b_;
};

// Mini-batch SGD with momentum and early stopping on a held-out slice.
void train_mlp(Mlp& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& targets, const MlpConfig& config,
               std::vector<CurvePoint>* curve);

class MlpClassifier {
 public:
  static MlpClassifier fit(const Eigen::MatrixXd& X, std::span<const int> labels, const MlpConfig& config,
                           std::vector<CurvePoint>* curve = nullptr);

  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X) const { return net_.forward(X); }
  int predict_one(std::span<const double> row) const;
  std::vector<int> predict(const Eigen::MatrixXd& X) const;

  const std::vector<int>& classes() const { return classes_; }
  const Mlp& network() const { return net_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(net_.layer_sizes().front()); }

  nlohmann::json to_json() const;
  static MlpClassifier from_json(const nlohmann::json& j);

 private:
  Mlp net_;
  std::vector<int> classes_;
};

// Standardizes inputs and targets internally; predictions are in target units.
class MlpRegressor {
 public:
  static MlpRegressor fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const MlpConfig& config,
                          std::vector<CurvePoint>* curve = nullptr);

  Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd predict_one(std::span<const double> x) const;

  const Mlp& network() const { return net_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(x_mean_.size()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(y_mean_.size()); }
  double train_r2() const { return train_r2_; }
  double validation_r2() const { return validation_r2_; }

  nlohmann::json to_json() const;
  static MlpRegressor from_json(const nlohmann::json& j);

 private:
  Mlp net_;
  Eigen::VectorXd x_mean_, x_scale_, y_mean_, y_scale_;
  double train_r2_ = 0.0;
  double validation_r2_ = 0.0;
};

}  // namespace lfil
