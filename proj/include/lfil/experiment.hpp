#pragma once

#include "lfil/baseline.hpp"
#include "lfil/dataset.hpp"
#include "lfil/metrics.hpp"
#include "lfil/model.hpp"
#include "lfil/pipeline.hpp"
#include "lfil/preprocess.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lfil {

struct ExperimentConfig {
  // [topology]; an empty file means "generate".
  std::string topology_file;
  SmallWorldParams generator;
  // [sim]
  SimConfig sim;
  // [dataset]
  std::uint64_t demand_seed = 1;
  std::uint64_t noise_seed = 2;
  std::uint64_t split_seed = 3;
  std::uint64_t scenario_seed = 4;
  std::size_t samples_per_class = 200;
  std::size_t reconnection_samples_per_class = 100;
  std::size_t max_reconnection_classes = 48;  // 0 keeps every reconnection class
  double test_fraction = 0.2;
  // [preprocess]
  double variance_to_retain = 0.99;
  Normalization normalization = Normalization::ZScore;
  // [train]
  Algorithm stage1_algorithm = Algorithm::RandomForest;
  Algorithm stage3_algorithm = Algorithm::RandomForest;
  TrainOptions classifiers;
  MlpConfig regressor{.hidden = {400, 400, 400}, .learning_rate = 0.1, .epochs = 60};
  // [pipeline]
  PipelineConfig pipeline;
  bool micro_average = false;
};

// Every key as "section.key" with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);
// Throws InvalidParams on an unknown key or a malformed value.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);
// Flat "key = value" lines grouped under [section] headers; '#' comments.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
std::string config_to_text(const ExperimentConfig& config);

// Edge list, GraphML (by extension) or the small-world generator.
Topology load_topology(const ExperimentConfig& config);

// Deterministic subset of the reconnection scenarios, capped by
// max_reconnection_classes, in enumeration order.
LabelSpace reconnection_label_space(const Topology& topology, const ExperimentConfig& config);

struct StageData {
  Dataset stage1_train, stage1_test;  // NoFault + disconnections
  Dataset stage2_train, stage2_test;  // disconnection rows of the stage-1 splits
  Dataset stage3_train, stage3_test;  // reconnections
};

// One demand matrix per experiment, shared by every stage.
StageData generate_stage_data(const Topology& topology, const ExperimentConfig& config);

// Regression inputs (rates + one-hot link) and targets (delays).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> regression_matrices(const Dataset& disconnection_rows, std::size_t V);

ClassifierStage train_classifier_stage(const Dataset& train, int stage, Algorithm algorithm,
                                       const ExperimentConfig& config, std::vector<CurvePoint>* curve = nullptr);
RegressorStage train_regressor_stage(const Dataset& train, std::size_t V, const ExperimentConfig& config,
                                     std::vector<CurvePoint>* curve = nullptr);

struct TrainingLog {
  std::vector<CurvePoint> stage1_curve, stage2_curve, stage3_curve;
};

Pipeline train_pipeline(const Topology& topology, const StageData& data, const ExperimentConfig& config,
                        TrainingLog* log = nullptr);

// Scores a classifier stage on rows of its own label space; stage-1
// reports include fault detection accuracy.
EvaluationReport evaluate_classifier_stage(const ClassifierStage& stage, const Dataset& test, std::string name,
                                           bool micro = false);
double regressor_r2(const RegressorStage& stage, const Dataset& disconnection_rows, std::size_t V);

// Stage-1 classes followed by stage-3 classes, relabeled accordingly.
struct MixedSet {
  Dataset data;
  std::size_t stage1_classes = 0;
};
MixedSet make_mixed_set(const Dataset& stage1_test, const Dataset& stage3_test);

struct MixedEvaluation {
  EvaluationReport stage1_alone;
  EvaluationReport pipeline;
  std::vector<Diagnosis> diagnoses;
};
MixedEvaluation evaluate_mixed(const Pipeline& pipeline, const MixedSet& mixed, bool micro = false);

struct SweepPoint {
  double threshold = 0.0;
  double identification_f1 = 0.0;  // DisconnectionOnly vs Reconnection on detected faulty rows
  double pipeline_f1 = 0.0;
};
std::vector<SweepPoint> threshold_sweep(const Pipeline& pipeline, const MixedSet& mixed,
                                        std::span<const double> thresholds, bool micro = false);
std::string sweep_to_csv(const std::vector<SweepPoint>& sweep);

struct ComparisonRow {
  std::string method;
  std::string topology;
  std::size_t nodes = 0;
  std::size_t links = 0;
  double accuracy = 0.0;
  double localization_time_us = 0.0;
};
// ML-LFIL stage-1 scope (disconnection test rows) against the ping baseline
// on the same scenarios.
std::vector<ComparisonRow> compare_with_baseline(const Topology& topology, const DemandMatrix& demands,
                                                 const Pipeline& pipeline, const Dataset& stage1_test,
                                                 const SimConfig& sim, const std::string& name);
std::string comparison_to_csv(const std::vector<ComparisonRow>& rows);

// Files: stage{1,2,3}_{train,test}.csv, labels_stage{1,3}.json,
// topology.edges, manifest.json. Every written file is byte-deterministic.
void write_stage_data(const std::filesystem::path& dir, const Topology& topology, const StageData& data,
                      const ExperimentConfig& config);
struct LoadedData {
  ExperimentConfig config;
  Topology topology;
  StageData data;
};
LoadedData read_stage_data(const std::filesystem::path& dir);
// The config recorded in a manifest.
ExperimentConfig config_from_manifest(const std::filesystem::path& manifest);

// Files: stage{1,3}.model.json, stage{1,3}.pre.json, stage2.model.json and
// the training-curve CSVs.
void write_pipeline(const std::filesystem::path& dir, const Pipeline& pipeline, const TrainingLog& log);
Pipeline read_pipeline(const std::filesystem::path& dir, std::size_t V, const std::string& topology_fingerprint,
                       PipelineConfig config = {});

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace lfil
