#include "lfil/model.hpp"

#include "lfil/error.hpp"

#include <cstdio>

namespace lfil {

Algorithm parse_algorithm(std::string_view name) {
  if (name == "rf") return Algorithm::RandomForest;
  if (name == "mlp") return Algorithm::Mlp;
  if (name == "svm") return Algorithm::Svm;
  throw Error(Errc::InvalidParams, "unknown algorithm '" + std::string(name) + "' (expected rf, mlp or svm)");
}

const char* to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::RandomForest: return "rf";
    case Algorithm::Mlp: return "mlp";
    case Algorithm::Svm: return "svm";
  }
  return "?";
}

Algorithm Classifier::algorithm() const {
  switch (model_.index()) {
    case 0: return Algorithm::RandomForest;
    case 1: return Algorithm::Mlp;
    default: return Algorithm::Svm;
  }
}

std::size_t Classifier::input_dim() const {
  return std::visit([](const auto& m) { return m.input_dim(); }, model_);
}

const std::vector<int>& Classifier::classes() const {
  return std::visit([](const auto& m) -> const std::vector<int>& { return m.classes(); }, model_);
}

int Classifier::predict_one(std::span<const double> row) const {
  if (row.size() != input_dim())
    throw Error(Errc::DimensionMismatch, "classifier expects " + std::to_string(input_dim()) + " features, got " +
                                             std::to_string(row.size()));
  return std::visit([&](const auto& m) { return m.predict_one(row); }, model_);
}

std::vector<int> Classifier::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != input_dim())
    throw Error(Errc::DimensionMismatch, "classifier expects " + std::to_string(input_dim()) + " features, got " +
                                             std::to_string(X.cols()));
  return std::visit([&](const auto& m) { return m.predict(X); }, model_);
}

Classifier train_classifier(Algorithm algo, const Eigen::MatrixXd& X, std::span<const int> labels,
                            const TrainOptions& options, std::vector<CurvePoint>* curve) {
  switch (algo) {
    case Algorithm::RandomForest: return Classifier(RandomForest::fit(X, labels, options.forest));
    case Algorithm::Mlp: return Classifier(MlpClassifier::fit(X, labels, options.mlp, curve));
    case Algorithm::Svm: return Classifier(LinearSvm::fit(X, labels, options.svm));
  }
  throw Error(Errc::InvalidParams, "unknown algorithm");
}

namespace {

nlohmann::json envelope(const char* kind, const ModelMeta& meta, nlohmann::json body) {
  return {{"format", "lfil-model"},
          {"version", kModelFormatVersion},
          {"kind", kind},
          {"stage", meta.stage},
          {"topology_fingerprint", meta.topology_fingerprint},
          {"preprocessor_fingerprint", meta.preprocessor_fingerprint},
          {"label_space", meta.label_space.to_json()},
          {"model", std::move(body)}};
}

nlohmann::json open_envelope(std::string_view text, ModelMeta& meta, const std::optional<std::string>& expected) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptModel, std::string("model JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != "lfil-model") throw Error(Errc::CorruptModel, "not a model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw Error(Errc::VersionMismatch, "model format version " + std::to_string(version) + ", expected " +
                                             std::to_string(kModelFormatVersion));
    meta.stage = j.at("stage").get<int>();
    meta.topology_fingerprint = j.at("topology_fingerprint").get<std::string>();
    meta.preprocessor_fingerprint = j.at("preprocessor_fingerprint").get<std::string>();
    meta.label_space = LabelSpace::from_json(j.at("label_space"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptModel, std::string("model envelope: ") + e.what());
  }
  if (expected && *expected != meta.topology_fingerprint)
    throw Error(Errc::FingerprintMismatch, "model was trained for topology " + meta.topology_fingerprint +
                                               ", expected " + *expected);
  return j;
}

}  // namespace

std::string serialize_model(const Classifier& model, const ModelMeta& meta) {
  nlohmann::json body = std::visit([](const auto& m) { return m.to_json(); }, model.variant());
  return envelope(to_string(model.algorithm()), meta, std::move(body)).dump();
}

std::string serialize_model(const MlpRegressor& model, const ModelMeta& meta) {
  return envelope("mlp-regressor", meta, model.to_json()).dump();
}

Loaded<Classifier> deserialize_classifier(std::string_view text, std::optional<std::string> expected_fingerprint) {
  Loaded<Classifier> out;
  const nlohmann::json j = open_envelope(text, out.meta, expected_fingerprint);
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const auto& body = j.at("model");
    if (kind == "rf") out.model = Classifier(RandomForest::from_json(body));
    else if (kind == "mlp") out.model = Classifier(MlpClassifier::from_json(body));
    else if (kind == "svm") out.model = Classifier(LinearSvm::from_json(body));
    else throw Error(Errc::CorruptModel, "not a classifier: " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptModel, std::string("model body: ") + e.what());
  }
  return out;
}

Loaded<MlpRegressor> deserialize_regressor(std::string_view text, std::optional<std::string> expected_fingerprint) {
  Loaded<MlpRegressor> out;
  const nlohmann::json j = open_envelope(text, out.meta, expected_fingerprint);
  try {
    if (j.at("kind").get<std::string>() != "mlp-regressor") throw Error(Errc::CorruptModel, "not a regressor");
    out.model = MlpRegressor::from_json(j.at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptModel, std::string("model body: ") + e.what());
  }
  return out;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "epoch,loss,metric\n";
  char buf[96];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", p.epoch, p.loss, p.metric);
    out += buf;
  }
  return out;
}

}  // namespace lfil
