// lfil: command-line driver for topology, dataset, training, evaluation,
// baseline comparison and diagnosis runs.

#include "lfil/error.hpp"
#include "lfil/experiment.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace lfil;

namespace {

struct Globals {
  std::string config_file;
  std::vector<std::string> overrides;
};

void log(const std::string& line) { std::cerr << line << '\n'; }

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

// Config file (flag, else $LFIL_CONFIG), then --set overrides, on top of base.
ExperimentConfig resolve_config(const Globals& g, ExperimentConfig base = {}) {
  std::string path = g.config_file;
  if (path.empty())
    if (const char* env = std::getenv("LFIL_CONFIG")) path = env;
  if (!path.empty()) base = parse_config(read_file(path), base);
  for (const auto& o : g.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(Errc::InvalidParams, "--set expects key=value, got '" + o + "'");
    set_config_value(base, o.substr(0, eq), o.substr(eq + 1));
  }
  return base;
}

nlohmann::ordered_json topology_summary(const Topology& t) {
  std::map<std::size_t, std::size_t> hist;
  for (auto d : t.degrees()) ++hist[d];
  nlohmann::ordered_json h = nlohmann::ordered_json::object();
  for (const auto& [d, n] : hist) h[std::to_string(d)] = n;
  return {{"nodes", t.node_count()},
          {"links", t.link_count()},
          {"removable_links", removable_links(t).size()},
          {"fingerprint", t.fingerprint()},
          {"degree_histogram", h}};
}

void emit_topology(const Topology& t, const std::string& out) {
  write_file(out, to_edge_list(t));
  std::cout << topology_summary(t).dump(2) << '\n';
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw Error(Errc::InvalidParams, "bad number '" + item + "' in list");
    v.push_back(x);
  }
  return v;
}

// V from a feature width 3·V·(V−1).
std::size_t nodes_for_width(std::size_t width) {
  const auto V = static_cast<std::size_t>(std::llround((1.0 + std::sqrt(1.0 + 4.0 * width / 3.0)) / 2.0));
  if (V < 2 || feature_count(V) != width) throw Error(Errc::DimensionMismatch, "width is not 3·V·(V−1)");
  return V;
}

Pipeline load_models(const fs::path& dir, const std::string& topology_file, const PipelineConfig& config) {
  if (!topology_file.empty()) {
    const Topology t = load_edge_list(read_file(topology_file));
    return read_pipeline(dir, t.node_count(), t.fingerprint(), config);
  }
  // Without a topology the stage-1 model's own fingerprint is trusted.
  const auto meta = deserialize_classifier(read_file(dir / "stage1.model.json")).meta;
  const auto pre = Preprocessor::from_json(nlohmann::json::parse(read_file(dir / "stage1.pre.json")));
  return read_pipeline(dir, nodes_for_width(pre.input_dim()), meta.topology_fingerprint, config);
}

std::vector<double> json_values(const nlohmann::json& j) {
  const auto& v = j.is_object() ? j.at("values") : j;
  return v.get<std::vector<double>>();
}

void write_report(const fs::path& dir, EvaluationReport rep, nlohmann::ordered_json& timing) {
  if (rep.timing)
    timing[rep.name] = {{"count", rep.timing->count}, {"mean_us", rep.timing->mean}, {"p50_us", rep.timing->p50},
                        {"p95_us", rep.timing->p95}};
  rep.timing.reset();  // timings live in timing.json so reports stay reproducible
  write_file(dir / (rep.name + ".json"), rep.to_json().dump(2) + "\n");
  write_file(dir / (rep.name + ".csv"), rep.to_csv());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ML link-fault identification and localization"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "Config file (default: $LFIL_CONFIG)");
  app.add_option("--set", g.overrides, "Override a config key, e.g. --set sim.noise_std_fraction=0.01");

  // topology
  auto* topo = app.add_subcommand("topology", "Generate or import a topology");
  topo->require_subcommand(1);
  SmallWorldParams gen;
  std::string gen_out;
  auto* tgen = topo->add_subcommand("gen", "Small-world generator");
  tgen->add_option("--nodes", gen.nodes)->required();
  tgen->add_option("--k", gen.k)->required();
  tgen->add_option("--p", gen.p)->required();
  tgen->add_option("--seed", gen.seed)->required();
  tgen->add_option("--capacity", gen.capacity_mbps, "Link capacity in Mbps");
  tgen->add_option("--min-length", gen.min_length_m);
  tgen->add_option("--max-length", gen.max_length_m);
  tgen->add_option("--out", gen_out)->required();
  std::string graphml, import_out;
  GraphmlOptions gopts;
  auto* timp = topo->add_subcommand("import", "GraphML ingestion");
  timp->add_option("--graphml", graphml)->required();
  timp->add_option("--capacity", gopts.capacity_mbps);
  timp->add_option("--default-length", gopts.default_length_m, "Length for edges without coordinates");
  timp->add_flag("--strict-geo", gopts.strict_geo, "Fail when a node lacks coordinates");
  timp->add_option("--out", import_out)->required();

  // dataset
  auto* ds = app.add_subcommand("dataset", "Generate stage datasets");
  std::string ds_out, ds_manifest, ds_topology;
  ds->add_option("--out", ds_out)->required();
  ds->add_option("--manifest", ds_manifest, "Reproduce the run recorded in a manifest");
  ds->add_option("--topology", ds_topology, "Topology file (overrides topology.file)");

  // train
  auto* tr = app.add_subcommand("train", "Train the three stages");
  std::string tr_data, tr_out, algo, algo1, algo3;
  tr->add_option("--data", tr_data)->required();
  tr->add_option("--out", tr_out)->required();
  tr->add_option("--algo", algo, "Learner for stages 1 and 3: rf, mlp or svm");
  tr->add_option("--stage1-algo", algo1);
  tr->add_option("--stage3-algo", algo3);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score trained models on the test splits");
  std::string ev_data, ev_models, ev_out, sweep;
  std::optional<double> ev_threshold;
  bool micro = false;
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--models", ev_models)->required();
  ev->add_option("--out", ev_out)->required();
  ev->add_option("--sweep-threshold", sweep, "Comma-separated thresholds");
  ev->add_option("--threshold", ev_threshold);
  ev->add_flag("--micro", micro, "Micro-averaged headline scores");

  // compare-baseline
  auto* cb = app.add_subcommand("compare-baseline", "ML-LFIL against the ping baseline");
  std::vector<std::string> cases;
  std::string cb_out;
  cb->add_option("--case", cases, "NAME:DATA_DIR:MODELS_DIR, repeatable")->required();
  cb->add_option("--out", cb_out, "CSV path (default: stdout)");

  // diagnose
  auto* dg = app.add_subcommand("diagnose", "Run the pipeline on feature vectors");
  std::string dg_models, dg_topology, dg_input, dg_batch, dg_out;
  std::optional<double> dg_threshold;
  dg->add_option("--models", dg_models)->required();
  dg->add_option("--topology", dg_topology, "Edge list the models must match");
  auto* in_opt = dg->add_option("--input", dg_input, "JSON feature vector ('-' for stdin)");
  auto* batch_opt = dg->add_option("--batch", dg_batch, "Dataset CSV or JSON-lines of vectors");
  in_opt->excludes(batch_opt);
  dg->add_option("--out", dg_out, "Output path (default: stdout)");
  dg->add_option("--threshold", dg_threshold);

  CLI11_PARSE(app, argc, argv);

  try {
    if (tgen->parsed()) {
      emit_topology(generate_small_world(gen), gen_out);
    } else if (timp->parsed()) {
      emit_topology(load_graphml(read_file(graphml), gopts), import_out);
    } else if (ds->parsed()) {
      ExperimentConfig cfg = ds_manifest.empty() ? ExperimentConfig{} : config_from_manifest(ds_manifest);
      cfg = resolve_config(g, cfg);
      if (!ds_topology.empty()) cfg.topology_file = ds_topology;
      const Topology t = load_topology(cfg);
      const StageData data = generate_stage_data(t, cfg);
      write_stage_data(ds_out, t, data, cfg);
      log("dataset: V=" + std::to_string(t.node_count()) + " E=" + std::to_string(t.link_count()) +
          " stage1 classes=" + std::to_string(data.stage1_train.present_classes().size()) +
          " rows=" + std::to_string(data.stage1_train.rows() + data.stage1_test.rows()) +
          " stage3 classes=" + std::to_string(data.stage3_train.present_classes().size()) +
          " rows=" + std::to_string(data.stage3_train.rows() + data.stage3_test.rows()));
    } else if (tr->parsed()) {
      LoadedData d = read_stage_data(tr_data);
      ExperimentConfig cfg = resolve_config(g, d.config);
      if (!algo.empty()) cfg.stage1_algorithm = cfg.stage3_algorithm = parse_algorithm(algo);
      if (!algo1.empty()) cfg.stage1_algorithm = parse_algorithm(algo1);
      if (!algo3.empty()) cfg.stage3_algorithm = parse_algorithm(algo3);
      TrainingLog tl;
      const Pipeline p = train_pipeline(d.topology, d.data, cfg, &tl);
      write_pipeline(tr_out, p, tl);
      nlohmann::ordered_json summary;
      const auto r1 = evaluate_classifier_stage(p.stage1(), d.data.stage1_train, "stage1_train");
      log("stage1 algo=" + std::string(to_string(cfg.stage1_algorithm)) + " classes=" +
          std::to_string(d.data.stage1_train.present_classes().size()) + " components=" +
          std::to_string(p.stage1().preprocessor.retained()) + " train F1 = " + fixed(r1.scores.macro_f1));
      summary["stage1_train_f1"] = r1.scores.macro_f1;
      if (p.stage3()) {
        const auto r3 = evaluate_classifier_stage(*p.stage3(), d.data.stage3_train, "stage3_train");
        log("stage3 algo=" + std::string(to_string(cfg.stage3_algorithm)) + " classes=" +
            std::to_string(d.data.stage3_train.present_classes().size()) + " components=" +
            std::to_string(p.stage3()->preprocessor.retained()) + " train F1 = " + fixed(r3.scores.macro_f1));
        summary["stage3_train_f1"] = r3.scores.macro_f1;
      } else {
        log("stage3 skipped: fewer than two reconnection classes");
      }
      summary["stage2_train_r2"] = p.stage2().model.train_r2();
      summary["stage2_validation_r2"] = p.stage2().model.validation_r2();
      summary["stage2_epochs"] = tl.stage2_curve.size();
      write_file(fs::path(tr_out) / "training.json", summary.dump(2) + "\n");
      log("stage2 epochs=" + std::to_string(tl.stage2_curve.size()) + " train R2 = " +
          fixed(p.stage2().model.train_r2()));
      log("stage2 validation R2 = " + fixed(p.stage2().model.validation_r2()));
    } else if (ev->parsed()) {
      LoadedData d = read_stage_data(ev_data);
      ExperimentConfig cfg = resolve_config(g, d.config);
      if (ev_threshold) cfg.pipeline.threshold = *ev_threshold;
      const bool use_micro = micro || cfg.micro_average;
      const std::size_t V = d.topology.node_count();
      const Pipeline p = read_pipeline(ev_models, V, d.topology.fingerprint(), cfg.pipeline);
      const fs::path out(ev_out);
      fs::create_directories(out);
      nlohmann::ordered_json timing;
      std::string bars = "report,precision,recall,f1\n", detect = "report,detection_accuracy\n";
      auto add_bar = [&](const EvaluationReport& r) {
        const bool m = r.micro;
        bars += r.name + "," + fixed(m ? r.scores.micro_precision : r.scores.macro_precision, 6) + "," +
                fixed(m ? r.scores.micro_recall : r.scores.macro_recall, 6) + "," + fixed(r.headline_f1(), 6) + "\n";
        if (r.detection_accuracy) detect += r.name + "," + fixed(*r.detection_accuracy, 6) + "\n";
      };

      auto s1 = evaluate_classifier_stage(p.stage1(), d.data.stage1_test, "stage1_disconnection", use_micro);
      add_bar(s1);
      write_report(out, s1, timing);
      log("stage1 disconnection-only F1 = " + fixed(s1.headline_f1()) +
          " detection accuracy = " + fixed(s1.detection_accuracy.value_or(0.0)));
      if (d.data.stage2_test.rows() > 0) {
        const double r2 = regressor_r2(p.stage2(), d.data.stage2_test, V);
        write_file(out / "stage2_regression.json", nlohmann::ordered_json{{"r2", r2}}.dump(2) + "\n");
        log("stage2 test R2 = " + fixed(r2));
      }
      if (p.stage3() && d.data.stage3_test.rows() > 0) {
        auto s3 = evaluate_classifier_stage(*p.stage3(), d.data.stage3_test, "stage3_reconnection", use_micro);
        add_bar(s3);
        write_report(out, s3, timing);
        log("stage3 reconnection-only F1 = " + fixed(s3.headline_f1()));
      }
      const MixedSet mixed = make_mixed_set(d.data.stage1_test, d.data.stage3_test);
      auto m = evaluate_mixed(p, mixed, use_micro);
      add_bar(m.stage1_alone);
      add_bar(m.pipeline);
      write_report(out, m.stage1_alone, timing);
      write_report(out, m.pipeline, timing);
      log("mixed set: stage-1 alone F1 = " + fixed(m.stage1_alone.headline_f1()) +
          ", pipeline F1 = " + fixed(m.pipeline.headline_f1()));
      write_file(out / "prf_bars.csv", bars);
      write_file(out / "detection_accuracy.csv", detect);
      if (!sweep.empty()) {
        const auto th = parse_list(sweep);
        write_file(out / "threshold_sweep.csv", sweep_to_csv(threshold_sweep(p, mixed, th, use_micro)));
        log("threshold sweep: " + std::to_string(th.size()) + " points");
      }
      write_file(out / "timing.json", timing.dump(2) + "\n");
    } else if (cb->parsed()) {
      std::vector<ComparisonRow> rows;
      for (const auto& c : cases) {
        const auto a = c.find(':'), b = c.find(':', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos)
          throw Error(Errc::InvalidParams, "--case expects NAME:DATA_DIR:MODELS_DIR, got '" + c + "'");
        const std::string name = c.substr(0, a);
        LoadedData d = read_stage_data(c.substr(a + 1, b - a - 1));
        const ExperimentConfig cfg = resolve_config(g, d.config);
        const Pipeline p = read_pipeline(c.substr(b + 1), d.topology.node_count(), d.topology.fingerprint(),
                                         cfg.pipeline);
        const DemandMatrix demands = default_demands(d.topology.node_count(), cfg.demand_seed);
        for (auto& r : compare_with_baseline(d.topology, demands, p, d.data.stage1_test, cfg.sim, name))
          rows.push_back(std::move(r));
      }
      const std::string csv = comparison_to_csv(rows);
      if (cb_out.empty()) std::cout << csv;
      else write_file(cb_out, csv);
    } else if (dg->parsed()) {
      PipelineConfig pc = resolve_config(g).pipeline;
      if (dg_threshold) pc.threshold = *dg_threshold;
      const Pipeline p = load_models(dg_models, dg_topology, pc);
      std::string out;
      if (!dg_batch.empty()) {
        const std::string text = read_file(dg_batch);
        if (text.rfind("label", 0) == 0) {
          const Dataset rows = from_csv(text);
          for (std::size_t r = 0; r < rows.rows(); ++r) {
            const auto row = rows.row(r);
            out += p.diagnose(std::vector<double>(row.begin(), row.end())).to_json().dump() + "\n";
          }
        } else {
          std::istringstream in(text);
          std::string line;
          while (std::getline(in, line))
            if (!line.empty()) out += p.diagnose(json_values(nlohmann::json::parse(line))).to_json().dump() + "\n";
        }
      } else {
        std::string text;
        if (dg_input.empty() || dg_input == "-") {
          std::ostringstream ss;
          ss << std::cin.rdbuf();
          text = ss.str();
        } else {
          text = read_file(dg_input);
        }
        out = p.diagnose(json_values(nlohmann::json::parse(text))).to_json().dump(2) + "\n";
      }
      if (dg_out.empty()) std::cout << out;
      else write_file(dg_out, out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: ParseError: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
