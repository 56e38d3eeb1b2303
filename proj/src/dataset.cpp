#include "lfil/dataset.hpp"

#include "lfil/error.hpp"
#include "lfil/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace lfil {

namespace {

nlohmann::json link_to_json(const Link& l) {
  return {{"u", l.key.u}, {"v", l.key.v}, {"capacity_mbps", l.capacity_mbps}, {"length_m", l.length_m}};
}

Link link_from_json(const nlohmann::json& j) {
  return Link{LinkKey(j.at("u").get<NodeId>(), j.at("v").get<NodeId>()), j.at("capacity_mbps").get<double>(),
              j.at("length_m").get<double>()};
}

}  // namespace

nlohmann::json scenario_to_json(const FaultScenario& s) {
  nlohmann::json j = {{"kind", to_string(s.kind)}};
  j["removed"] = s.removed ? link_to_json(*s.removed) : nlohmann::json(nullptr);
  j["added"] = s.added ? link_to_json(*s.added) : nlohmann::json(nullptr);
  return j;
}

FaultScenario scenario_from_json(const nlohmann::json& j) {
  FaultScenario s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "NoFault") s.kind = FaultKind::NoFault;
  else if (kind == "Disconnection") s.kind = FaultKind::Disconnection;
  else if (kind == "Reconnection") s.kind = FaultKind::Reconnection;
  else throw Error(Errc::ParseError, "unknown scenario kind " + kind);
  if (j.contains("removed") && !j["removed"].is_null()) s.removed = link_from_json(j["removed"]);
  if (j.contains("added") && !j["added"].is_null()) s.added = link_from_json(j["added"]);
  s.validate();
  return s;
}

int LabelSpace::id_of(const FaultScenario& scenario) const {
  const std::string key = scenario.key();
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i].key() == key) return static_cast<int>(i);
  return -1;
}

nlohmann::json LabelSpace::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : classes) arr.push_back(scenario_to_json(c));
  return arr;
}

LabelSpace LabelSpace::from_json(const nlohmann::json& j) {
  LabelSpace ls;
  for (const auto& c : j) ls.classes.push_back(scenario_from_json(c));
  return ls;
}

LabelSpace disconnection_label_space(const Topology& topology) {
  LabelSpace ls;
  ls.classes.push_back(FaultScenario::none());
  for (const auto& l : topology.links()) ls.classes.push_back(FaultScenario::disconnection(l));
  return ls;
}

LabelSpace make_label_space(std::vector<FaultScenario> scenarios) { return LabelSpace{std::move(scenarios)}; }

void Dataset::append(std::span<const double> values, int label) {
  if (feature_count == 0 && rows() == 0) feature_count = values.size();
  if (values.size() != feature_count) throw Error(Errc::DimensionMismatch, "row width differs from dataset");
  for (double v : values) features.push_back(static_cast<float>(v));
  labels.push_back(label);
}

std::vector<int> Dataset::class_counts() const {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<int> counts(static_cast<std::size_t>(std::max<int>(max_label + 1, static_cast<int>(label_space.size()))), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

std::vector<int> Dataset::present_classes() const {
  std::vector<int> out(labels);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Dataset Dataset::select(std::span<const std::size_t> picked) const {
  Dataset out;
  out.feature_count = feature_count;
  out.label_space = label_space;
  out.fingerprint = fingerprint;
  out.features.reserve(picked.size() * feature_count);
  out.labels.reserve(picked.size());
  for (std::size_t r : picked) {
    auto src = row(r);
    out.features.insert(out.features.end(), src.begin(), src.end());
    out.labels.push_back(labels[r]);
  }
  return out;
}

DemandMatrix default_demands(std::size_t V, std::uint64_t demand_seed) {
  return DemandMatrix::uniform(V, 1.0, 300.0, demand_seed);
}

Dataset generate_dataset(const Topology& topology, const LabelSpace& label_space, std::size_t samples_per_class,
                         const DemandMatrix& demands, std::uint64_t noise_seed, const SimConfig& config) {
  if (samples_per_class < 1) throw Error(Errc::InvalidParams, "samples_per_class must be >= 1");
  config.validate();
  std::vector<MeasureJob> jobs;
  for (std::size_t c = 0; c < label_space.size(); ++c) {
    try {
      (void)apply_fault(topology, label_space.classes[c]);
    } catch (const Error& e) {
      if (e.code() == Errc::DisconnectsGraph) continue;
      throw;
    }
    for (std::size_t i = 0; i < samples_per_class; ++i) jobs.push_back({c, derive_seed(noise_seed, c, i)});
  }
  auto rows = measure_batch(topology, demands, label_space.classes, jobs, config);

  Dataset ds;
  ds.feature_count = feature_count(topology.node_count());
  ds.label_space = label_space;
  ds.fingerprint = topology.fingerprint();
  ds.features.reserve(rows.size() * ds.feature_count);
  for (std::size_t j = 0; j < rows.size(); ++j) ds.append(rows[j].values, static_cast<int>(jobs[j].scenario));
  return ds;
}

Dataset generate_dataset(const Topology& topology, const LabelSpace& label_space, std::size_t samples_per_class,
                         std::uint64_t demand_seed, std::uint64_t noise_seed, const SimConfig& config) {
  return generate_dataset(topology, label_space, samples_per_class,
                          default_demands(topology.node_count(), demand_seed), noise_seed, config);
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(Errc::InvalidParams, "test_fraction must lie in (0, 1)");
  const auto classes = dataset.present_classes();
  std::vector<std::vector<std::size_t>> members(classes.size());
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    auto it = std::lower_bound(classes.begin(), classes.end(), dataset.labels[r]);
    members[static_cast<std::size_t>(it - classes.begin())].push_back(r);
  }
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (members[c].size() < 2)
      throw Error(Errc::ClassTooSmall, "class " + std::to_string(classes[c]) + " has fewer than 2 rows");

  // Largest-remainder apportionment of the test quota.
  const auto total_test = static_cast<std::size_t>(std::llround(static_cast<double>(dataset.rows()) * test_fraction));
  std::vector<std::size_t> quota(classes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const double exact = static_cast<double>(members[c].size()) * test_fraction;
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total_test && i < remainders.size(); ++i, ++assigned) ++quota[remainders[i].second];
  for (std::size_t c = 0; c < classes.size(); ++c) quota[c] = std::clamp<std::size_t>(quota[c], 1, members[c].size() - 1);

  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    auto rows = members[c];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(classes[c])));
    std::shuffle(rows.begin(), rows.end(), rng);
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(quota[c]), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {dataset.select(train_rows), dataset.select(test_rows)};
}

std::string to_csv(const Dataset& dataset) {
  std::string out = "label";
  for (std::size_t f = 0; f < dataset.feature_count; ++f) out += ",f" + std::to_string(f);
  out += '\n';
  char buf[32];
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    out += std::to_string(dataset.labels[r]);
    for (float v : dataset.row(r)) {
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(v));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Dataset from_csv(std::string_view text) {
  Dataset ds;
  std::size_t pos = text.find('\n');
  if (pos == std::string_view::npos) throw Error(Errc::ParseError, "dataset CSV: missing header");
  std::string_view header = text.substr(0, pos);
  if (header.substr(0, 5) != "label") throw Error(Errc::ParseError, "dataset CSV: header must start with 'label'");
  ds.feature_count = static_cast<std::size_t>(std::count(header.begin(), header.end(), ','));
  ++pos;
  std::size_t line_no = 1;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto fail = [&] { throw Error(Errc::ParseError, "dataset CSV line " + std::to_string(line_no)); };
    std::size_t field = 0, start = 0;
    int label = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string_view::npos) comma = line.size();
      std::string_view tok = line.substr(start, comma - start);
      if (field == 0) {
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), label);
        if (ec != std::errc() || p != tok.data() + tok.size()) fail();
      } else {
        float v = 0.0f;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size()) fail();
        ds.features.push_back(v);
      }
      ++field;
      start = comma + 1;
      if (comma == line.size()) break;
    }
    if (field != ds.feature_count + 1) fail();
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace lfil
