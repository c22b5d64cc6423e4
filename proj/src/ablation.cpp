#include "pns/ablation.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "pns/errors.hpp"

namespace pns {

std::vector<AblationVariant> ablation_variants(const TrainConfig& base,
                                               const std::vector<std::string>& axes) {
  std::vector<AblationVariant> out;
  for (const auto& axis : axes) {
    if (axis == "pt") {
      for (bool on : {true, false}) {
        TrainConfig c = base;
        c.model.pt_enabled = on;
        out.push_back({axis, on ? "on" : "off", c});
      }
    } else if (axis == "k") {
      for (int k : {1, 2, 3}) {
        TrainConfig c = base;
        c.model.top_k = k;
        out.push_back({axis, std::to_string(k), c});
      }
    } else if (axis == "metric") {
      for (auto m : {DistanceMetric::kL1, DistanceMetric::kL2}) {
        TrainConfig c = base;
        c.model.metric = m;
        out.push_back({axis, to_string(m), c});
      }
    } else if (axis == "lambda") {
      for (const char* v : {"0.1", "0.5", "1"}) {
        TrainConfig c = base;
        c.model.lambda = std::stod(v);
        out.push_back({axis, v, c});
      }
    } else if (axis == "filter") {
      for (bool on : {false, true}) {
        TrainConfig c = base;
        c.model.filter = on ? std::optional(base.model.filter.value_or(CandidateFilter{}))
                            : std::nullopt;
        out.push_back({axis, on ? "on" : "off", c});
      }
    } else {
      throw ConfigError("unknown ablation axis '" + axis +
                        "' (expected pt, k, metric, lambda or filter)");
    }
  }
  return out;
}

EvalReport mean_report(const std::vector<EvalReport>& reports) {
  EvalReport m;
  if (reports.empty()) return m;
  m.scenes = reports.front().scenes;
  m.by_k = reports.front().by_k;
  for (auto& k : m.by_k) k.made = k.mfde = 0.0;
  double acc = 0.0, truth = 0.0;
  bool has_acc = true, has_truth = true;
  for (const auto& r : reports) {
    if (r.by_k.size() != m.by_k.size()) throw ShapeMismatch("reports disagree on K values");
    for (std::size_t i = 0; i < m.by_k.size(); ++i) {
      m.by_k[i].made += r.by_k[i].made;
      m.by_k[i].mfde += r.by_k[i].mfde;
    }
    has_acc = has_acc && r.predecessor_accuracy.has_value();
    has_truth = has_truth && r.truth_accuracy.has_value();
    if (r.predecessor_accuracy) acc += *r.predecessor_accuracy;
    if (r.truth_accuracy) truth += *r.truth_accuracy;
    m.empty_rate += r.empty_rate;
    m.wall_seconds += r.wall_seconds;
  }
  const double n = static_cast<double>(reports.size());
  for (auto& k : m.by_k) {
    k.made /= n;
    k.mfde /= n;
  }
  if (has_acc) m.predecessor_accuracy = acc / n;
  if (has_truth) m.truth_accuracy = truth / n;
  m.empty_rate /= n;
  return m;
}

const AblationRow& AblationTable::row(const std::string& axis, const std::string& value) const {
  for (const auto& r : rows) {
    if (r.axis == axis && r.value == value) return r;
  }
  throw ConfigError("no ablation row " + axis + "=" + value);
}

std::string AblationTable::to_text() const {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-8s %-6s", "axis", "value");
  os << buf;
  for (int k : ks) {
    std::snprintf(buf, sizeof buf, " %9s %9s", ("mADE_" + std::to_string(k)).c_str(),
                  ("mFDE_" + std::to_string(k)).c_str());
    os << buf;
  }
  os << "  accuracy\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s %-6s", r.axis.c_str(), r.value.c_str());
    os << buf;
    for (const auto& m : r.mean.by_k) {
      std::snprintf(buf, sizeof buf, " %9.4f %9.4f", m.made, m.mfde);
      os << buf;
    }
    if (r.mean.predecessor_accuracy) {
      std::snprintf(buf, sizeof buf, "  %8.4f\n", *r.mean.predecessor_accuracy);
    } else {
      std::snprintf(buf, sizeof buf, "  %8s\n", "n/a");
    }
    os << buf;
  }
  return os.str();
}

nlohmann::json AblationTable::to_json() const {
  nlohmann::json j;
  j["ks"] = ks;
  j["seeds"] = seeds;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& p : r.per_seed) per.push_back(p.to_json());
    j["rows"].push_back(
        {{"axis", r.axis}, {"value", r.value}, {"mean", r.mean.to_json()}, {"per_seed", per}});
  }
  return j;
}

AblationTable ablation_run(const TrainConfig& base, const std::vector<std::string>& axes,
                           const std::vector<Scene>& train_scenes,
                           const std::vector<Scene>& test_scenes,
                           const std::vector<std::uint64_t>& seeds,
                           const AblationProgress& progress) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  AblationTable table;
  table.ks = base.eval_k;
  table.seeds = seeds;
  std::map<std::string, EvalReport> cache;
  for (const auto& variant : ablation_variants(base, axes)) {
    AblationRow row{variant.axis, variant.value, {}, {}};
    for (std::uint64_t seed : seeds) {
      TrainConfig c = variant.config;
      c.seed = seed;
      const std::string key = c.to_json().dump();
      auto it = cache.find(key);
      if (it == cache.end()) {
        const TrainResult trained = train(c, train_scenes);
        it = cache.emplace(key, evaluate(trained.model, test_scenes, c.eval_k)).first;
      }
      row.per_seed.push_back(it->second);
      if (progress) progress(variant, seed, it->second);
    }
    row.mean = mean_report(row.per_seed);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace pns
