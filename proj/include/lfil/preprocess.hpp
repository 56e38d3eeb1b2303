#pragma once

#include "lfil/dataset.hpp"

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lfil {

enum class Normalization { ZScore, MinMax };

// Normalization followed by projection onto the leading principal axes of
// the normalized training data.
class Preprocessor {
 public:
  Normalization normalization = Normalization::ZScore;
  Eigen::VectorXd offset;      // mean (z-score) or min (min-max)
  Eigen::VectorXd scale;       // std or range; 1 for degenerate columns
  Eigen::VectorXd center;      // mean of normalized data (0 for z-score)
  Eigen::MatrixXd components;  // retained × features, orthonormal rows
  std::vector<double> explained_variance_ratio;  // per retained component
  double variance_to_retain = 0.99;
  std::string topology_fingerprint;

  std::size_t input_dim() const { return static_cast<std::size_t>(offset.size()); }
  std::size_t retained() const { return static_cast<std::size_t>(components.rows()); }

  // Rows are samples.
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& projected) const;
  Eigen::VectorXd transform_one(std::span<const double> row) const;

  nlohmann::json to_json() const;
  static Preprocessor from_json(const nlohmann::json& j);
  // Hash of the serialized parameters.
  std::string fingerprint() const;
};

Preprocessor fit_preprocessor(const Eigen::MatrixXd& train, double variance_to_retain,
                              Normalization normalization = Normalization::ZScore);
Preprocessor fit_preprocessor(const Dataset& train, double variance_to_retain,
                              Normalization normalization = Normalization::ZScore);

Eigen::MatrixXd to_matrix(const Dataset& dataset);

}  // namespace lfil
