#pragma once

#include "lfil/dataset.hpp"
#include "lfil/forest.hpp"
#include "lfil/mlp.hpp"
#include "lfil/svm.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace lfil {

enum class Algorithm { RandomForest, Mlp, Svm };

Algorithm parse_algorithm(std::string_view name);
const char* to_string(Algorithm algo);

// Uniform front for the three classifiers.
class Classifier {
 public:
  using Variant = std::variant<RandomForest, MlpClassifier, LinearSvm>;

  Classifier() = default;
  explicit Classifier(Variant model) : model_(std::move(model)) {}

  Algorithm algorithm() const;
  std::size_t input_dim() const;
  const std::vector<int>& classes() const;

  // Dimension-checked, pure; batch results equal row-by-row results.
  int predict_one(std::span<const double> row) const;
  std::vector<int> predict(const Eigen::MatrixXd& X) const;

  const Variant& variant() const { return model_; }

 private:
  Variant model_;
};

struct TrainOptions {
  ForestConfig forest;
  MlpConfig mlp;
  SvmConfig svm;
};

// Throws SingleClass when fewer than two classes are present.
Classifier train_classifier(Algorithm algo, const Eigen::MatrixXd& X, std::span<const int> labels,
                            const TrainOptions& options, std::vector<CurvePoint>* curve = nullptr);

struct ModelMeta {
  std::string topology_fingerprint;
  std::string preprocessor_fingerprint;
  LabelSpace label_space;
  int stage = 0;
};

inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const Classifier& model, const ModelMeta& meta);
std::string serialize_model(const MlpRegressor& model, const ModelMeta& meta);

template <typename Model>
struct Loaded {
  Model model;
  ModelMeta meta;
};

// Throws CorruptModel on malformed input, VersionMismatch on a different
// format version and FingerprintMismatch when the expected topology
// fingerprint is given and differs.
Loaded<Classifier> deserialize_classifier(std::string_view text,
                                          std::optional<std::string> expected_fingerprint = std::nullopt);
Loaded<MlpRegressor> deserialize_regressor(std::string_view text,
                                           std::optional<std::string> expected_fingerprint = std::nullopt);

// "epoch,loss,metric" CSV.
std::string curve_to_csv(const std::vector<CurvePoint>& curve);

}  // namespace lfil
