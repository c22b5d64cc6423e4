#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pns/scene.hpp"
#include "pns/tracing.hpp"

namespace pns {

struct LabelRow {
  int scene = 0;
  int candidates = 0;           // default candidate rule
  int filtered = 0;             // after the threshold filter; equals candidates without one
  std::vector<int> agent_ids;   // labeled agent id per future step, -1 for none
  std::vector<int> agents;      // labeled agent index per future step
  std::vector<double> distances;  // phi at the labeled agent; NaN for none
  std::optional<double> truth_match;  // fraction of planted steps matched
};

struct LabelTable {
  std::string metric;
  std::optional<CandidateFilter> filter;
  std::vector<LabelRow> rows;
  int total_candidates = 0;
  int total_filtered = 0;
  std::optional<double> truth_match;  // over all planted steps

  // One line per (scene, future step): scene step agent_id distance
  // candidates filtered. Steps without a candidate print -1 and nan.
  std::string to_text() const;
  nlohmann::json to_json() const;
};

// truth, when given, is aligned with scenes (see truth_from_sidecar).
LabelTable label_table(const std::vector<Scene>& scenes, DistanceMetric metric,
                       const std::optional<CandidateFilter>& filter,
                       const std::vector<std::vector<int>>* truth = nullptr);

}  // namespace pns
