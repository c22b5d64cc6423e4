#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pns/config.hpp"
#include "pns/train_eval.hpp"

namespace pns {

// One study axis value applied on top of a base configuration.
struct AblationVariant {
  std::string axis;   // pt, k, metric, lambda, filter
  std::string value;  // on/off, 1..3, l1/l2, 0.1/0.5/1
  TrainConfig config;
};

// Expands axes into variants in a fixed order. Unknown axes throw ConfigError.
std::vector<AblationVariant> ablation_variants(const TrainConfig& base,
                                               const std::vector<std::string>& axes);

struct AblationRow {
  std::string axis;
  std::string value;
  std::vector<EvalReport> per_seed;
  EvalReport mean;  // metrics averaged over seeds
};

struct AblationTable {
  std::vector<int> ks;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;

  const AblationRow& row(const std::string& axis, const std::string& value) const;
  std::string to_text() const;
  nlohmann::json to_json() const;
};

using AblationProgress =
    std::function<void(const AblationVariant&, std::uint64_t seed, const EvalReport&)>;

// Trains every variant once per seed under the same budget and evaluates on
// test. Variants whose configuration coincides (for example pt=on and
// filter=off) share their runs.
AblationTable ablation_run(const TrainConfig& base, const std::vector<std::string>& axes,
                           const std::vector<Scene>& train_scenes,
                           const std::vector<Scene>& test_scenes,
                           const std::vector<std::uint64_t>& seeds,
                           const AblationProgress& progress = {});

// Mean of several reports with the same K list.
EvalReport mean_report(const std::vector<EvalReport>& reports);

}  // namespace pns
