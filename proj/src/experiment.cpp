#include "lfil/experiment.hpp"

#include "lfil/error.hpp"
#include "lfil/rng.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace lfil {

namespace fs = std::filesystem;

// ---- config ---------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(Errc::InvalidParams, "bad value '" + std::string(value) + "' for " + std::string(key));
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
template <typename I>
  requires std::is_integral_v<I>
std::string fmt(I v) {
  return std::to_string(v);
}
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }
std::string fmt(Algorithm a) { return to_string(a); }
std::string fmt(Normalization n) { return n == Normalization::ZScore ? "zscore" : "minmax"; }
std::string fmt(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

template <typename T>
void parse_into(T& out, std::string_view key, std::string_view s) {
  if constexpr (std::is_same_v<T, bool>) {
    if (s == "true" || s == "1") out = true;
    else if (s == "false" || s == "0") out = false;
    else bad_value(key, s);
  } else if constexpr (std::is_arithmetic_v<T>) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad_value(key, s);
    out = v;
  } else if constexpr (std::is_same_v<T, std::string>) {
    out = std::string(s);
  } else if constexpr (std::is_same_v<T, Algorithm>) {
    out = parse_algorithm(s);
  } else if constexpr (std::is_same_v<T, Normalization>) {
    if (s == "zscore") out = Normalization::ZScore;
    else if (s == "minmax") out = Normalization::MinMax;
    else bad_value(key, s);
  } else if constexpr (std::is_same_v<T, std::vector<int>>) {
    std::vector<int> v;
    std::string_view rest = s;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string item = trim(rest.substr(0, comma));
      int x = 0;
      parse_into(x, key, item);
      v.push_back(x);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    out = std::move(v);
  }
}

struct Entry {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

template <typename Proj>
Entry entry(std::string key, Proj proj) {
  return {key, [proj](const ExperimentConfig& c) { return fmt(proj(const_cast<ExperimentConfig&>(c))); },
          [proj, key](ExperimentConfig& c, std::string_view v) { parse_into(proj(c), key, v); }};
}

void add_mlp_entries(std::vector<Entry>& out, const std::string& section, MlpConfig ExperimentConfig::*member) {
  out.push_back(entry(section + ".hidden", [member](ExperimentConfig& c) -> auto& { return (c.*member).hidden; }));
  out.push_back(entry(section + ".learning_rate", [member](ExperimentConfig& c) -> auto& { return (c.*member).learning_rate; }));
  out.push_back(entry(section + ".momentum", [member](ExperimentConfig& c) -> auto& { return (c.*member).momentum; }));
  out.push_back(entry(section + ".epochs", [member](ExperimentConfig& c) -> auto& { return (c.*member).epochs; }));
  out.push_back(entry(section + ".batch_size", [member](ExperimentConfig& c) -> auto& { return (c.*member).batch_size; }));
  out.push_back(entry(section + ".l2", [member](ExperimentConfig& c) -> auto& { return (c.*member).l2; }));
  out.push_back(entry(section + ".patience", [member](ExperimentConfig& c) -> auto& { return (c.*member).patience; }));
  out.push_back(entry(section + ".validation_fraction",
                      [member](ExperimentConfig& c) -> auto& { return (c.*member).validation_fraction; }));
  out.push_back(entry(section + ".seed", [member](ExperimentConfig& c) -> auto& { return (c.*member).seed; }));
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
#define LFIL_ENTRY(name, expr) e.push_back(entry(name, [](ExperimentConfig& c) -> auto& { return expr; }))
    LFIL_ENTRY("topology.file", c.topology_file);
    LFIL_ENTRY("topology.nodes", c.generator.nodes);
    LFIL_ENTRY("topology.k", c.generator.k);
    LFIL_ENTRY("topology.p", c.generator.p);
    LFIL_ENTRY("topology.seed", c.generator.seed);
    LFIL_ENTRY("topology.capacity_mbps", c.generator.capacity_mbps);
    LFIL_ENTRY("topology.min_length_m", c.generator.min_length_m);
    LFIL_ENTRY("topology.max_length_m", c.generator.max_length_m);
    LFIL_ENTRY("sim.queueing_base_delay_us", c.sim.queueing_base_delay_us);
    LFIL_ENTRY("sim.max_utilization_cap", c.sim.max_utilization_cap);
    LFIL_ENTRY("sim.reconvergence_time_ms", c.sim.reconvergence_time_ms);
    LFIL_ENTRY("sim.measurement_interval_ms", c.sim.measurement_interval_ms);
    LFIL_ENTRY("sim.noise_std_fraction", c.sim.noise_std_fraction);
    LFIL_ENTRY("sim.probe_overhead_us", c.sim.probe_overhead_us);
    LFIL_ENTRY("dataset.demand_seed", c.demand_seed);
    LFIL_ENTRY("dataset.noise_seed", c.noise_seed);
    LFIL_ENTRY("dataset.split_seed", c.split_seed);
    LFIL_ENTRY("dataset.scenario_seed", c.scenario_seed);
    LFIL_ENTRY("dataset.samples_per_class", c.samples_per_class);
    LFIL_ENTRY("dataset.reconnection_samples_per_class", c.reconnection_samples_per_class);
    LFIL_ENTRY("dataset.max_reconnection_classes", c.max_reconnection_classes);
    LFIL_ENTRY("dataset.test_fraction", c.test_fraction);
    LFIL_ENTRY("preprocess.variance_to_retain", c.variance_to_retain);
    LFIL_ENTRY("preprocess.normalization", c.normalization);
    LFIL_ENTRY("train.stage1_algorithm", c.stage1_algorithm);
    LFIL_ENTRY("train.stage3_algorithm", c.stage3_algorithm);
    LFIL_ENTRY("rf.trees", c.classifiers.forest.trees);
    LFIL_ENTRY("rf.max_depth", c.classifiers.forest.max_depth);
    LFIL_ENTRY("rf.min_samples_leaf", c.classifiers.forest.min_samples_leaf);
    LFIL_ENTRY("rf.features_per_split", c.classifiers.forest.features_per_split);
    LFIL_ENTRY("rf.seed", c.classifiers.forest.seed);
    LFIL_ENTRY("mlp.hidden", c.classifiers.mlp.hidden);
    LFIL_ENTRY("mlp.learning_rate", c.classifiers.mlp.learning_rate);
    LFIL_ENTRY("mlp.momentum", c.classifiers.mlp.momentum);
    LFIL_ENTRY("mlp.epochs", c.classifiers.mlp.epochs);
    LFIL_ENTRY("mlp.batch_size", c.classifiers.mlp.batch_size);
    LFIL_ENTRY("mlp.l2", c.classifiers.mlp.l2);
    LFIL_ENTRY("mlp.patience", c.classifiers.mlp.patience);
    LFIL_ENTRY("mlp.validation_fraction", c.classifiers.mlp.validation_fraction);
    LFIL_ENTRY("mlp.seed", c.classifiers.mlp.seed);
    LFIL_ENTRY("svm.learning_rate", c.classifiers.svm.learning_rate);
    LFIL_ENTRY("svm.epochs", c.classifiers.svm.epochs);
    LFIL_ENTRY("svm.batch_size", c.classifiers.svm.batch_size);
    LFIL_ENTRY("svm.l2", c.classifiers.svm.l2);
    LFIL_ENTRY("svm.seed", c.classifiers.svm.seed);
    add_mlp_entries(e, "regressor", &ExperimentConfig::regressor);
    LFIL_ENTRY("pipeline.threshold", c.pipeline.threshold);
    LFIL_ENTRY("pipeline.micro_average", c.micro_average);
#undef LFIL_ENTRY
    return e;
  }();
  return entries;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : registry()) out.emplace_back(e.key, e.get(config));
  return out;
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (const auto& e : registry())
    if (e.key == key) {
      e.set(config, trim(value));
      return;
    }
  throw Error(Errc::InvalidParams, "unknown config key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::istringstream in{std::string(text)};
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string s = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": unterminated section");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    try {
      set_config_value(base, full, std::string_view(s).substr(eq + 1));
    } catch (const Error& e) {
      throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

std::string config_to_text(const ExperimentConfig& config) {
  std::string out, section;
  for (const auto& [key, value] : config_entries(config)) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "" : "\n") + ("[" + sec + "]\n");
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

// ---- data -----------------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

Topology load_topology(const ExperimentConfig& config) {
  if (config.topology_file.empty()) return generate_small_world(config.generator);
  const fs::path path(config.topology_file);
  const std::string text = read_file(path);
  if (path.extension() == ".graphml" || path.extension() == ".xml") {
    GraphmlOptions opts;
    opts.capacity_mbps = config.generator.capacity_mbps;
    return load_graphml(text, opts);
  }
  return load_edge_list(text);
}

LabelSpace reconnection_label_space(const Topology& topology, const ExperimentConfig& config) {
  auto all = enumerate_scenarios(topology, {.reconnection = true}, config.scenario_seed);
  // Reconnections that still partition the graph are dropped.
  std::vector<FaultScenario> ok;
  for (auto& s : all) {
    try {
      (void)apply_fault(topology, s);
      ok.push_back(std::move(s));
    } catch (const Error& e) {
      if (e.code() != Errc::DisconnectsGraph) throw;
    }
  }
  if (config.max_reconnection_classes == 0 || ok.size() <= config.max_reconnection_classes)
    return make_label_space(std::move(ok));
  std::vector<std::size_t> idx(ok.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(config.scenario_seed, 3));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(config.max_reconnection_classes);
  std::sort(idx.begin(), idx.end());
  std::vector<FaultScenario> chosen;
  for (auto i : idx) chosen.push_back(ok[i]);
  return make_label_space(std::move(chosen));
}

namespace {

Dataset faulty_rows(const Dataset& d) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < d.rows(); ++r)
    if (d.label_space.at(d.labels[r]).kind != FaultKind::NoFault) rows.push_back(r);
  return d.select(rows);
}

}  // namespace

StageData generate_stage_data(const Topology& topology, const ExperimentConfig& config) {
  config.sim.validate();
  const DemandMatrix demands = default_demands(topology.node_count(), config.demand_seed);
  StageData out;
  const Dataset s1 = generate_dataset(topology, disconnection_label_space(topology), config.samples_per_class, demands,
                                      derive_seed(config.noise_seed, 1), config.sim);
  std::tie(out.stage1_train, out.stage1_test) = split(s1, config.test_fraction, derive_seed(config.split_seed, 1));
  out.stage2_train = faulty_rows(out.stage1_train);
  out.stage2_test = faulty_rows(out.stage1_test);

  const LabelSpace recon = reconnection_label_space(topology, config);
  if (recon.size() > 0) {
    const Dataset s3 = generate_dataset(topology, recon, config.reconnection_samples_per_class, demands,
                                        derive_seed(config.noise_seed, 3), config.sim);
    std::tie(out.stage3_train, out.stage3_test) = split(s3, config.test_fraction, derive_seed(config.split_seed, 3));
  } else {
    out.stage3_train.feature_count = out.stage3_test.feature_count = feature_count(topology.node_count());
    out.stage3_train.label_space = out.stage3_test.label_space = recon;
    out.stage3_train.fingerprint = out.stage3_test.fingerprint = topology.fingerprint();
  }
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> regression_matrices(const Dataset& rows, std::size_t V) {
  const std::size_t P = pair_count(V);
  if (rows.feature_count != feature_count(V)) throw Error(Errc::DimensionMismatch, "dataset width vs topology");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.rows()), static_cast<Eigen::Index>(stage2_input_dim(V)));
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(rows.rows()), static_cast<Eigen::Index>(P));
  std::vector<double> rates(P);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto& s = rows.label_space.at(rows.labels[r]);
    if (s.kind != FaultKind::Disconnection) throw Error(Errc::InvalidParams, "regression rows must be disconnections");
    const auto row = rows.row(r);
    for (std::size_t i = 0; i < P; ++i) {
      rates[i] = row[i];
      Y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = row[P + i];
    }
    X.row(static_cast<Eigen::Index>(r)) = stage2_input(rates, s.removed->key, V).transpose();
  }
  return {std::move(X), std::move(Y)};
}

ClassifierStage train_classifier_stage(const Dataset& train, int stage, Algorithm algorithm,
                                       const ExperimentConfig& config, std::vector<CurvePoint>* curve) {
  ClassifierStage out;
  out.preprocessor = fit_preprocessor(train, config.variance_to_retain, config.normalization);
  const Eigen::MatrixXd Z = out.preprocessor.transform(to_matrix(train));
  out.model = train_classifier(algorithm, Z, train.labels, config.classifiers, curve);
  out.meta = {train.fingerprint, out.preprocessor.fingerprint(), train.label_space, stage};
  return out;
}

RegressorStage train_regressor_stage(const Dataset& train, std::size_t V, const ExperimentConfig& config,
                                     std::vector<CurvePoint>* curve) {
  const auto [X, Y] = regression_matrices(train, V);
  RegressorStage out;
  out.model = MlpRegressor::fit(X, Y, config.regressor, curve);
  out.meta = {train.fingerprint, "", train.label_space, 2};
  return out;
}

Pipeline train_pipeline(const Topology& topology, const StageData& data, const ExperimentConfig& config,
                        TrainingLog* log) {
  const std::size_t V = topology.node_count();
  auto s1 = train_classifier_stage(data.stage1_train, 1, config.stage1_algorithm, config,
                                   log ? &log->stage1_curve : nullptr);
  auto s2 = train_regressor_stage(data.stage2_train, V, config, log ? &log->stage2_curve : nullptr);
  std::optional<ClassifierStage> s3;
  if (data.stage3_train.present_classes().size() >= 2)
    s3 = train_classifier_stage(data.stage3_train, 3, config.stage3_algorithm, config,
                                log ? &log->stage3_curve : nullptr);
  return Pipeline(V, topology.fingerprint(), std::move(s1), std::move(s2), std::move(s3), config.pipeline);
}

// ---- evaluation -----------------------------------------------------------

namespace {

std::vector<double> row_values(const Dataset& d, std::size_t r) {
  const auto row = d.row(r);
  return {row.begin(), row.end()};
}

std::vector<std::string> class_names(const LabelSpace& space) {
  std::vector<std::string> names;
  for (const auto& c : space.classes) names.push_back(c.key());
  return names;
}

double elapsed_us(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

EvaluationReport evaluate_classifier_stage(const ClassifierStage& stage, const Dataset& test, std::string name,
                                           bool micro) {
  const std::size_t K = stage.meta.label_space.size();
  std::vector<int> predicted(test.rows());
  std::vector<double> times(test.rows());
  for (std::size_t r = 0; r < test.rows(); ++r) {
    const auto x = row_values(test, r);
    const auto start = std::chrono::steady_clock::now();
    const Eigen::VectorXd z = stage.preprocessor.transform_one(x);
    predicted[r] = stage.model.predict_one({z.data(), static_cast<std::size_t>(z.size())});
    times[r] = elapsed_us(start);
  }
  EvaluationReport rep;
  rep.name = std::move(name);
  rep.micro = micro;
  rep.scores = precision_recall_f1(ConfusionMatrix::from_labels(K, test.labels, predicted));
  rep.class_names = class_names(stage.meta.label_space);
  rep.timing = summarize_times(times);
  if (K > 0 && stage.meta.label_space.at(0).kind == FaultKind::NoFault) {
    const bool any_faulty = std::any_of(test.labels.begin(), test.labels.end(), [](int l) { return l != 0; });
    if (any_faulty) rep.detection_accuracy = fault_detection_accuracy(predicted, test.labels, 0);
  }
  return rep;
}

double regressor_r2(const RegressorStage& stage, const Dataset& rows, std::size_t V) {
  const auto [X, Y] = regression_matrices(rows, V);
  const Eigen::MatrixXd P = stage.model.predict(X);
  return r2_score({P.data(), static_cast<std::size_t>(P.size())}, {Y.data(), static_cast<std::size_t>(Y.size())});
}

MixedSet make_mixed_set(const Dataset& stage1_test, const Dataset& stage3_test) {
  MixedSet m;
  m.stage1_classes = stage1_test.label_space.size();
  m.data.feature_count = stage1_test.feature_count;
  m.data.fingerprint = stage1_test.fingerprint;
  m.data.label_space = stage1_test.label_space;
  for (const auto& c : stage3_test.label_space.classes) m.data.label_space.classes.push_back(c);
  for (std::size_t r = 0; r < stage1_test.rows(); ++r) m.data.append(row_values(stage1_test, r), stage1_test.labels[r]);
  for (std::size_t r = 0; r < stage3_test.rows(); ++r)
    m.data.append(row_values(stage3_test, r), static_cast<int>(m.stage1_classes) + stage3_test.labels[r]);
  return m;
}

namespace {

// Per-row stage outputs that do not depend on the threshold.
struct Trace {
  int stage1 = 0;
  double delay_error = 0.0;
  std::pair<LinkKey, LinkKey> stage3;
};

std::vector<Trace> trace_rows(const Pipeline& p, const Dataset& d) {
  const std::size_t P = pair_count(p.node_count());
  std::vector<Trace> out(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    const auto x = row_values(d, r);
    Trace& t = out[r];
    t.stage1 = p.stage1_classify(x);
    const auto& s1 = p.stage1().meta.label_space.at(t.stage1);
    if (s1.kind == FaultKind::NoFault) continue;
    const std::span<const double> xs(x);
    t.delay_error = p.stage2_identify(xs.subspan(0, P), s1.removed->key, xs.subspan(P, P), 0.5).delay_error;
    if (p.stage3()) t.stage3 = p.stage3_localize(x);
  }
  return out;
}

std::string link_text(LinkKey k) { return std::to_string(k.u) + "-" + std::to_string(k.v); }

// Key of the pipeline's answer at the given threshold.
std::string trace_key(const Pipeline& p, const Trace& t, double threshold, FaultType* type) {
  const auto& s1 = p.stage1().meta.label_space.at(t.stage1);
  if (s1.kind == FaultKind::NoFault) {
    *type = FaultType::None;
    return "none";
  }
  if (!p.stage3() || t.delay_error < threshold) {
    *type = FaultType::DisconnectionOnly;
    return "d:" + link_text(s1.removed->key);
  }
  *type = FaultType::Reconnection;
  return "r:" + link_text(t.stage3.first) + ">" + link_text(t.stage3.second);
}

std::unordered_map<std::string, int> key_index(const LabelSpace& space) {
  std::unordered_map<std::string, int> m;
  for (std::size_t i = 0; i < space.size(); ++i) m.emplace(space.classes[i].key(), static_cast<int>(i));
  return m;
}

// Unknown answers land in an extra column K.
int lookup(const std::unordered_map<std::string, int>& index, const std::string& key, std::size_t K) {
  const auto it = index.find(key);
  return it == index.end() ? static_cast<int>(K) : it->second;
}

}  // namespace

MixedEvaluation evaluate_mixed(const Pipeline& pipeline, const MixedSet& mixed, bool micro) {
  const auto& space = mixed.data.label_space;
  const std::size_t K = space.size();
  const auto index = key_index(space);
  MixedEvaluation out;
  std::vector<int> alone(mixed.data.rows()), full(mixed.data.rows());
  std::vector<double> times;
  for (std::size_t r = 0; r < mixed.data.rows(); ++r) {
    const auto x = row_values(mixed.data, r);
    alone[r] = pipeline.stage1_classify(x);
    Diagnosis d = pipeline.diagnose(x);
    full[r] = lookup(index, d.scenario_key(), K);
    times.push_back(d.inference_time_us);
    out.diagnoses.push_back(std::move(d));
  }
  auto names = class_names(space);
  names.push_back("other");
  for (auto* rep : {&out.stage1_alone, &out.pipeline}) {
    rep->micro = micro;
    rep->class_names = names;
  }
  out.stage1_alone.name = "stage1_alone_mixed";
  out.stage1_alone.scores = precision_recall_f1(ConfusionMatrix::from_labels(K + 1, mixed.data.labels, alone));
  out.stage1_alone.detection_accuracy = fault_detection_accuracy(alone, mixed.data.labels, 0);
  out.pipeline.name = "pipeline_mixed";
  out.pipeline.scores = precision_recall_f1(ConfusionMatrix::from_labels(K + 1, mixed.data.labels, full));
  out.pipeline.detection_accuracy = out.stage1_alone.detection_accuracy;
  out.pipeline.timing = summarize_times(times);
  return out;
}

std::vector<SweepPoint> threshold_sweep(const Pipeline& pipeline, const MixedSet& mixed,
                                        std::span<const double> thresholds, bool micro) {
  const auto& space = mixed.data.label_space;
  const std::size_t K = space.size();
  const auto index = key_index(space);
  const auto traces = trace_rows(pipeline, mixed.data);
  std::vector<SweepPoint> out;
  for (double t : thresholds) {
    PipelineConfig{t}.validate();
    ConfusionMatrix full(K + 1), types(2);
    for (std::size_t r = 0; r < traces.size(); ++r) {
      FaultType type{};
      const std::string key = trace_key(pipeline, traces[r], t, &type);
      full.add(mixed.data.labels[r], lookup(index, key, K));
      const auto truth = space.at(mixed.data.labels[r]).kind;
      if (truth == FaultKind::NoFault || type == FaultType::None) continue;
      types.add(truth == FaultKind::Reconnection ? 1 : 0, type == FaultType::Reconnection ? 1 : 0);
    }
    const auto fs_ = precision_recall_f1(full);
    const auto ts = precision_recall_f1(types);
    out.push_back({t, micro ? ts.micro_f1 : ts.macro_f1, micro ? fs_.micro_f1 : fs_.macro_f1});
  }
  return out;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& sweep) {
  std::string out = "threshold,identification_f1,pipeline_f1\n";
  char buf[128];
  for (const auto& p : sweep) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", p.threshold, p.identification_f1, p.pipeline_f1);
    out += buf;
  }
  return out;
}

std::vector<ComparisonRow> compare_with_baseline(const Topology& topology, const DemandMatrix& demands,
                                                 const Pipeline& pipeline, const Dataset& stage1_test,
                                                 const SimConfig& sim, const std::string& name) {
  ComparisonRow ml{"ML-LFIL", name, topology.node_count(), topology.link_count(), 0.0, 0.0};
  ComparisonRow ping{"ping-baseline", name, topology.node_count(), topology.link_count(), 0.0, 0.0};
  std::map<int, std::size_t> per_class;
  std::size_t n = 0, correct = 0;
  double time = 0.0;
  for (std::size_t r = 0; r < stage1_test.rows(); ++r) {
    const auto& truth = stage1_test.label_space.at(stage1_test.labels[r]);
    if (truth.kind != FaultKind::Disconnection) continue;
    const Diagnosis d = pipeline.diagnose(row_values(stage1_test, r));
    ++n;
    correct += d.tentative_link && *d.tentative_link == truth.removed->key;
    time += d.inference_time_us;
    ++per_class[stage1_test.labels[r]];
  }
  if (n == 0) throw Error(Errc::NoFaultyPoints, "no disconnection rows to compare on");
  ml.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  ml.localization_time_us = time / static_cast<double>(n);

  // Pings are deterministic per scenario, so each class is probed once and
  // weighted by its row count.
  double hits = 0.0, total_time = 0.0;
  for (const auto& [label, count] : per_class) {
    const auto& truth = stage1_test.label_space.at(label);
    const Topology faulty = apply_fault(topology, truth);
    const auto res = probe_and_localize(faulty, topology, demands, sim);
    const auto w = static_cast<double>(count);
    if (res.predicted_key == truth.removed->key) hits += w;
    total_time += w * res.report.total_time_us();
  }
  ping.accuracy = hits / static_cast<double>(n);
  ping.localization_time_us = total_time / static_cast<double>(n);
  return {ml, ping};
}

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "method,topology,nodes,links,accuracy,localization_time_us\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%.4f,%.2f\n", r.method.c_str(), r.topology.c_str(), r.nodes,
                  r.links, r.accuracy, r.localization_time_us);
    out += buf;
  }
  return out;
}

// ---- persistence ----------------------------------------------------------

namespace {

constexpr const char* kStageFiles[] = {"stage1_train", "stage1_test", "stage2_train",
                                       "stage2_test",  "stage3_train", "stage3_test"};

std::array<const Dataset*, 6> stage_list(const StageData& d) {
  return {&d.stage1_train, &d.stage1_test, &d.stage2_train, &d.stage2_test, &d.stage3_train, &d.stage3_test};
}

nlohmann::ordered_json config_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_entries(config)) j[k] = v;
  return j;
}

}  // namespace

void write_stage_data(const fs::path& dir, const Topology& topology, const StageData& data,
                      const ExperimentConfig& config) {
  fs::create_directories(dir);
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  auto put = [&](const std::string& name, const std::string& text, std::size_t rows, std::size_t classes) {
    write_file(dir / name, text);
    files.push_back({{"name", name}, {"rows", rows}, {"classes", classes}, {"fnv1a", fingerprint_hex(text)}});
  };
  put("topology.edges", to_edge_list(topology), 0, 0);
  put("labels_stage1.json", data.stage1_train.label_space.to_json().dump(1) + "\n", 0,
      data.stage1_train.label_space.size());
  put("labels_stage3.json", data.stage3_train.label_space.to_json().dump(1) + "\n", 0,
      data.stage3_train.label_space.size());
  const auto sets = stage_list(data);
  for (std::size_t i = 0; i < sets.size(); ++i)
    put(std::string(kStageFiles[i]) + ".csv", to_csv(*sets[i]), sets[i]->rows(), sets[i]->present_classes().size());

  nlohmann::ordered_json m = {{"format", "lfil-dataset"},
                              {"version", 1},
                              {"topology_fingerprint", topology.fingerprint()},
                              {"nodes", topology.node_count()},
                              {"links", topology.link_count()},
                              {"removable_links", removable_links(topology).size()},
                              {"config", config_json(config)},
                              {"files", files}};
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

ExperimentConfig config_from_manifest(const fs::path& manifest) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, manifest.string() + ": " + e.what());
  }
  if (!j.contains("config") || !j["config"].is_object())
    throw Error(Errc::ParseError, manifest.string() + ": no config section");
  ExperimentConfig c;
  for (const auto& [k, v] : j["config"].items()) set_config_value(c, k, v.get<std::string>());
  return c;
}

LoadedData read_stage_data(const fs::path& dir) {
  ExperimentConfig config = config_from_manifest(dir / "manifest.json");
  Topology topology = load_edge_list(read_file(dir / "topology.edges"));
  const auto fp = topology.fingerprint();
  const LabelSpace l1 = LabelSpace::from_json(nlohmann::json::parse(read_file(dir / "labels_stage1.json")));
  const LabelSpace l3 = LabelSpace::from_json(nlohmann::json::parse(read_file(dir / "labels_stage3.json")));
  StageData data;
  Dataset* sets[] = {&data.stage1_train, &data.stage1_test, &data.stage2_train,
                     &data.stage2_test,  &data.stage3_train, &data.stage3_test};
  for (std::size_t i = 0; i < 6; ++i) {
    Dataset& d = *sets[i];
    d = from_csv(read_file(dir / (std::string(kStageFiles[i]) + ".csv")));
    d.label_space = i < 4 ? l1 : l3;
    d.fingerprint = fp;
    if (d.feature_count == 0) d.feature_count = feature_count(topology.node_count());
    if (d.feature_count != feature_count(topology.node_count()))
      throw Error(Errc::DimensionMismatch, std::string(kStageFiles[i]) + ".csv width does not match the topology");
    for (int l : d.labels)
      if (l < 0 || static_cast<std::size_t>(l) >= d.label_space.size())
        throw Error(Errc::ValidationError, std::string(kStageFiles[i]) + ".csv has a label outside its label space");
  }
  return {std::move(config), std::move(topology), std::move(data)};
}

void write_pipeline(const fs::path& dir, const Pipeline& p, const TrainingLog& log) {
  fs::create_directories(dir);
  write_file(dir / "stage1.pre.json", p.stage1().preprocessor.to_json().dump() + "\n");
  write_file(dir / "stage1.model.json", serialize_model(p.stage1().model, p.stage1().meta) + "\n");
  write_file(dir / "stage2.model.json", serialize_model(p.stage2().model, p.stage2().meta) + "\n");
  write_file(dir / "stage1.curve.csv", curve_to_csv(log.stage1_curve));
  write_file(dir / "stage2.curve.csv", curve_to_csv(log.stage2_curve));
  fs::remove(dir / "stage3.pre.json");
  fs::remove(dir / "stage3.model.json");
  fs::remove(dir / "stage3.curve.csv");
  if (p.stage3()) {
    write_file(dir / "stage3.pre.json", p.stage3()->preprocessor.to_json().dump() + "\n");
    write_file(dir / "stage3.model.json", serialize_model(p.stage3()->model, p.stage3()->meta) + "\n");
    write_file(dir / "stage3.curve.csv", curve_to_csv(log.stage3_curve));
  }
}

namespace {

ClassifierStage read_classifier_stage(const fs::path& dir, const std::string& stem, const std::string& fp) {
  ClassifierStage s;
  try {
    s.preprocessor = Preprocessor::from_json(nlohmann::json::parse(read_file(dir / (stem + ".pre.json"))));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptModel, stem + ".pre.json: " + e.what());
  }
  auto loaded = deserialize_classifier(read_file(dir / (stem + ".model.json")), fp);
  s.model = std::move(loaded.model);
  s.meta = std::move(loaded.meta);
  return s;
}

}  // namespace

Pipeline read_pipeline(const fs::path& dir, std::size_t V, const std::string& fp, PipelineConfig config) {
  auto s1 = read_classifier_stage(dir, "stage1", fp);
  auto r = deserialize_regressor(read_file(dir / "stage2.model.json"), fp);
  std::optional<ClassifierStage> s3;
  if (fs::exists(dir / "stage3.model.json")) s3 = read_classifier_stage(dir, "stage3", fp);
  return Pipeline(V, fp, std::move(s1), RegressorStage{std::move(r.model), std::move(r.meta)}, std::move(s3), config);
}

}  // namespace lfil
