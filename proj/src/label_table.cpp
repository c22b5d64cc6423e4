#include "pns/label_table.hpp"

#include <cstdio>
#include <limits>
#include <sstream>

#include "pns/errors.hpp"
#include "pns/kernels.hpp"

namespace pns {

namespace {

int count(const nn::Mask& mask) {
  int n = 0;
  for (auto v : mask) n += v != 0;
  return n;
}

}  // namespace

LabelTable label_table(const std::vector<Scene>& scenes, DistanceMetric metric,
                       const std::optional<CandidateFilter>& filter,
                       const std::vector<std::vector<int>>* truth) {
  if (truth && truth->size() != scenes.size()) {
    throw ShapeMismatch("truth sidecar has " + std::to_string(truth->size()) +
                        " scenes, archive has " + std::to_string(scenes.size()));
  }
  const auto labels = label_batch(scenes, metric, filter);
  LabelTable table;
  table.metric = to_string(metric);
  table.filter = filter;
  int planted = 0, matched = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& s = scenes[i];
    LabelRow row;
    row.scene = static_cast<int>(i);
    row.candidates = count(default_candidates(s));
    row.filtered = filter ? count(candidate_filter(s, *filter)) : row.candidates;
    row.agents = labels[i].agent;
    for (std::size_t k = 0; k < row.agents.size(); ++k) {
      const int a = row.agents[k];
      row.agent_ids.push_back(a < 0 ? -1 : s.agent_ids[a]);
      row.distances.push_back(a < 0 ? std::numeric_limits<double>::quiet_NaN()
                                    : labels[i].distance[k]);
    }
    if (truth) {
      int p = 0, m = 0;
      const auto& t = (*truth)[i];
      for (std::size_t k = 0; k < t.size() && k < row.agents.size(); ++k) {
        if (t[k] < 0) continue;
        ++p;
        m += row.agents[k] == t[k];
      }
      if (p > 0) row.truth_match = static_cast<double>(m) / p;
      planted += p;
      matched += m;
    }
    table.total_candidates += row.candidates;
    table.total_filtered += row.filtered;
    table.rows.push_back(std::move(row));
  }
  if (truth && planted > 0) table.truth_match = static_cast<double>(matched) / planted;
  return table;
}

std::string LabelTable::to_text() const {
  std::ostringstream os;
  os << "# metric " << metric;
  if (filter) os << " d_max " << filter->d_max << " fov " << filter->fov_deg;
  os << "\n# candidates " << total_candidates << " filtered " << total_filtered << "\n";
  if (truth_match) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "# truth_match %.6f\n", *truth_match);
    os << buf;
  }
  os << "# scene step agent_id distance candidates filtered\n";
  char buf[96];
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.agent_ids.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%d %zu %d %.6f %d %d\n", r.scene, k + 1, r.agent_ids[k],
                    r.distances[k], r.candidates, r.filtered);
      os << buf;
    }
  }
  return os.str();
}

nlohmann::json LabelTable::to_json() const {
  nlohmann::json j;
  j["metric"] = metric;
  if (filter) j["filter"] = {{"d_max", filter->d_max}, {"fov", filter->fov_deg}};
  j["candidates"] = total_candidates;
  j["filtered"] = total_filtered;
  if (truth_match) j["truth_match"] = *truth_match;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json steps = nlohmann::json::array();
    for (std::size_t k = 0; k < r.agent_ids.size(); ++k) {
      nlohmann::json step = {{"step", k + 1}, {"agent_id", r.agent_ids[k]}};
      step["distance"] = r.agent_ids[k] < 0 ? nlohmann::json(nullptr) : nlohmann::json(r.distances[k]);
      steps.push_back(step);
    }
    nlohmann::json row = {{"scene", r.scene},
                          {"candidates", r.candidates},
                          {"filtered", r.filtered},
                          {"steps", steps}};
    if (r.truth_match) row["truth_match"] = *r.truth_match;
    j["rows"].push_back(row);
  }
  return j;
}

}  // namespace pns
