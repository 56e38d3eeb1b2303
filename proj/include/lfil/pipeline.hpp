#pragma once

#include "lfil/dataset.hpp"
#include "lfil/model.hpp"
#include "lfil/preprocess.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <json.hpp>

namespace lfil {

enum class FaultType { None, DisconnectionOnly, Reconnection };

const char* to_string(FaultType type);

struct Diagnosis {
  bool fault_detected = false;
  std::optional<LinkKey> tentative_link;     // L1
  FaultType fault_type = FaultType::None;
  std::optional<LinkKey> disconnected_link;  // L2
  std::optional<LinkKey> reconnected_link;   // L3
  std::optional<double> delay_error;         // set when stage 2 ran
  double inference_time_us = 0.0;

  // Throws InvalidScenario when the type invariants do not hold.
  void validate() const;
  // Same text form as FaultScenario::key().
  std::string scenario_key() const;
  nlohmann::ordered_json to_json() const;
};

struct PipelineConfig {
  double threshold = 0.10;

  void validate() const;
};

struct ClassifierStage {
  Preprocessor preprocessor;
  Classifier model;
  ModelMeta meta;
};

struct RegressorStage {
  MlpRegressor model;
  ModelMeta meta;
};

// Stage-2 regressor input: raw rates followed by one-hot(u) and one-hot(v)
// of the hypothesized disconnected link.
Eigen::VectorXd stage2_input(std::span<const double> rates, LinkKey link, std::size_t V);
inline std::size_t stage2_input_dim(std::size_t V) { return pair_count(V) + 2 * V; }

// sqrt(mean (p − a)²) / sqrt(mean a²).
double delay_error(std::span<const double> predicted, std::span<const double> actual);

struct Stage2Result {
  FaultType type = FaultType::DisconnectionOnly;
  double delay_error = 0.0;
};

class Pipeline {
 public:
  // Throws FingerprintMismatch unless every stage, preprocessor and the
  // expected topology fingerprint agree, DimensionMismatch on shape errors.
  // Without a stage-3 model (topologies with fewer than two reconnection
  // classes) every detected fault is reported as DisconnectionOnly.
  Pipeline(std::size_t V, std::string topology_fingerprint, ClassifierStage stage1, RegressorStage stage2,
           std::optional<ClassifierStage> stage3, PipelineConfig config = {});

  std::size_t node_count() const { return V_; }
  const std::string& topology_fingerprint() const { return fingerprint_; }
  const PipelineConfig& config() const { return config_; }
  const ClassifierStage& stage1() const { return stage1_; }
  const RegressorStage& stage2() const { return stage2_; }
  const std::optional<ClassifierStage>& stage3() const { return stage3_; }

  // Class id in the stage-1 label space.
  int stage1_classify(std::span<const double> features) const;
  Stage2Result stage2_identify(std::span<const double> rates, LinkKey l1, std::span<const double> actual_delays,
                               double threshold) const;
  // (L2, L3) decoded from the stage-3 class.
  std::pair<LinkKey, LinkKey> stage3_localize(std::span<const double> features) const;

  Diagnosis diagnose(std::span<const double> features) const { return diagnose(features, config_.threshold); }
  Diagnosis diagnose(std::span<const double> features, double threshold) const;

 private:
  void check_width(std::span<const double> features) const;

  std::size_t V_;
  std::string fingerprint_;
  ClassifierStage stage1_;
  RegressorStage stage2_;
  std::optional<ClassifierStage> stage3_;
  PipelineConfig config_;
};

}  // namespace lfil
