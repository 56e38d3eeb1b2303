#include "lfil/pipeline.hpp"

#include "lfil/error.hpp"

#include <chrono>
#include <cmath>
#include <vector>

namespace lfil {

const char* to_string(FaultType type) {
  switch (type) {
    case FaultType::None: return "None";
    case FaultType::DisconnectionOnly: return "DisconnectionOnly";
    case FaultType::Reconnection: return "Reconnection";
  }
  return "?";
}

namespace {

std::string link_text(LinkKey k) { return std::to_string(k.u) + "-" + std::to_string(k.v); }

nlohmann::ordered_json link_json(const std::optional<LinkKey>& k) {
  if (!k) return nullptr;
  return nlohmann::ordered_json::array({k->u, k->v});
}

}  // namespace

void Diagnosis::validate() const {
  const bool ok = [&] {
    switch (fault_type) {
      case FaultType::None:
        return !fault_detected && !tentative_link && !disconnected_link && !reconnected_link && !delay_error;
      case FaultType::DisconnectionOnly:
        return fault_detected && tentative_link && disconnected_link == tentative_link && !reconnected_link &&
               delay_error;
      case FaultType::Reconnection:
        return fault_detected && tentative_link && disconnected_link && reconnected_link && delay_error &&
               disconnected_link != reconnected_link;
    }
    return false;
  }();
  if (!ok) throw Error(Errc::InvalidScenario, std::string("inconsistent diagnosis of type ") + to_string(fault_type));
}

std::string Diagnosis::scenario_key() const {
  switch (fault_type) {
    case FaultType::None: return "none";
    case FaultType::DisconnectionOnly: return "d:" + link_text(*disconnected_link);
    case FaultType::Reconnection: return "r:" + link_text(*disconnected_link) + ">" + link_text(*reconnected_link);
  }
  return "?";
}

nlohmann::ordered_json Diagnosis::to_json() const {
  nlohmann::ordered_json j = {{"fault_detected", fault_detected},
                      {"tentative_link", link_json(tentative_link)},
                      {"fault_type", to_string(fault_type)},
                      {"disconnected_link", link_json(disconnected_link)},
                      {"reconnected_link", link_json(reconnected_link)},
                      {"delay_error", nullptr},
                      {"inference_time_us", inference_time_us}};
  if (delay_error) j["delay_error"] = *delay_error;
  return j;
}

void PipelineConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(Errc::InvalidParams, "threshold must lie in (0, 1)");
}

Eigen::VectorXd stage2_input(std::span<const double> rates, LinkKey link, std::size_t V) {
  if (rates.size() != pair_count(V)) throw Error(Errc::DimensionMismatch, "rates block width");
  if (link.v >= V) throw Error(Errc::UnknownLink, "link endpoint outside the topology");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(stage2_input_dim(V)));
  for (std::size_t i = 0; i < rates.size(); ++i) x[static_cast<Eigen::Index>(i)] = rates[i];
  x[static_cast<Eigen::Index>(rates.size() + link.u)] = 1.0;
  x[static_cast<Eigen::Index>(rates.size() + V + link.v)] = 1.0;
  return x;
}

double delay_error(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size() || actual.empty())
    throw Error(Errc::DimensionMismatch, "predicted vs actual delays");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double r = predicted[i] - actual[i];
    num += r * r;
    den += actual[i] * actual[i];
  }
  if (!(den > 0.0)) throw Error(Errc::InvalidParams, "actual delays are all zero");
  return std::sqrt(num / den);
}

Pipeline::Pipeline(std::size_t V, std::string topology_fingerprint, ClassifierStage stage1, RegressorStage stage2,
                   std::optional<ClassifierStage> stage3, PipelineConfig config)
    : V_(V),
      fingerprint_(std::move(topology_fingerprint)),
      stage1_(std::move(stage1)),
      stage2_(std::move(stage2)),
      stage3_(std::move(stage3)),
      config_(config) {
  config_.validate();
  auto same = [&](const std::string& fp, const char* what) {
    if (fp != fingerprint_)
      throw Error(Errc::FingerprintMismatch,
                  std::string(what) + " belongs to topology " + fp + ", pipeline expects " + fingerprint_);
  };
  std::vector<const ClassifierStage*> stages{&stage1_};
  if (stage3_) stages.push_back(&*stage3_);
  for (const auto* s : stages) {
    const char* name = s == &stage1_ ? "stage-1" : "stage-3";
    same(s->meta.topology_fingerprint, name);
    same(s->preprocessor.topology_fingerprint, name);
    if (s->meta.preprocessor_fingerprint != s->preprocessor.fingerprint())
      throw Error(Errc::FingerprintMismatch, std::string(name) + " model was fitted with a different preprocessor");
    if (s->preprocessor.input_dim() != feature_count(V_) || s->model.input_dim() != s->preprocessor.retained())
      throw Error(Errc::DimensionMismatch, std::string(name) + " model shape does not fit the topology");
  }
  same(stage2_.meta.topology_fingerprint, "stage-2");
  if (stage2_.model.input_dim() != stage2_input_dim(V_) || stage2_.model.output_dim() != pair_count(V_))
    throw Error(Errc::DimensionMismatch, "stage-2 regressor shape does not fit the topology");
  if (stage1_.meta.label_space.size() == 0 || stage1_.meta.label_space.at(0).kind != FaultKind::NoFault)
    throw Error(Errc::InvalidParams, "stage-1 class 0 must be NoFault");
  if (stage3_)
    for (const auto& c : stage3_->meta.label_space.classes)
      if (c.kind != FaultKind::Reconnection) throw Error(Errc::InvalidParams, "stage-3 classes must be reconnections");
}

void Pipeline::check_width(std::span<const double> features) const {
  if (features.size() != feature_count(V_))
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(feature_count(V_)) + " features, got " +
                                             std::to_string(features.size()));
}

int Pipeline::stage1_classify(std::span<const double> features) const {
  check_width(features);
  const Eigen::VectorXd z = stage1_.preprocessor.transform_one(features);
  return stage1_.model.predict_one({z.data(), static_cast<std::size_t>(z.size())});
}

Stage2Result Pipeline::stage2_identify(std::span<const double> rates, LinkKey l1,
                                       std::span<const double> actual_delays, double threshold) const {
  if (actual_delays.size() != pair_count(V_)) throw Error(Errc::DimensionMismatch, "delays block width");
  const Eigen::VectorXd x = stage2_input(rates, l1, V_);
  const Eigen::VectorXd predicted = stage2_.model.predict_one({x.data(), static_cast<std::size_t>(x.size())});
  Stage2Result r;
  r.delay_error = delay_error({predicted.data(), static_cast<std::size_t>(predicted.size())}, actual_delays);
  r.type = r.delay_error < threshold ? FaultType::DisconnectionOnly : FaultType::Reconnection;
  return r;
}

std::pair<LinkKey, LinkKey> Pipeline::stage3_localize(std::span<const double> features) const {
  check_width(features);
  if (!stage3_) throw Error(Errc::InvalidParams, "pipeline has no stage-3 model");
  const Eigen::VectorXd z = stage3_->preprocessor.transform_one(features);
  const int c = stage3_->model.predict_one({z.data(), static_cast<std::size_t>(z.size())});
  const auto& s = stage3_->meta.label_space.at(c);
  return {s.removed->key, s.added->key};
}

Diagnosis Pipeline::diagnose(std::span<const double> features, double threshold) const {
  const auto start = std::chrono::steady_clock::now();
  Diagnosis d;
  const int c1 = stage1_classify(features);
  const auto& s1 = stage1_.meta.label_space.at(c1);
  if (s1.kind != FaultKind::NoFault) {
    d.fault_detected = true;
    d.tentative_link = s1.removed->key;
    const std::size_t P = pair_count(V_);
    const auto r2 = stage2_identify(features.subspan(0, P), *d.tentative_link, features.subspan(P, P), threshold);
    d.delay_error = r2.delay_error;
    d.fault_type = stage3_ ? r2.type : FaultType::DisconnectionOnly;
    if (d.fault_type == FaultType::DisconnectionOnly) {
      d.disconnected_link = d.tentative_link;
    } else {
      const auto [l2, l3] = stage3_localize(features);
      d.disconnected_link = l2;
      d.reconnected_link = l3;
    }
  }
  d.inference_time_us =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  return d;
}

}  // namespace lfil
