#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pns/config.hpp"
#include "pns/model.hpp"

namespace pns {

// ---- evaluation ----------------------------------------------------------

struct KMetrics {
  int k = 0;
  double made = 0.0;
  double mfde = 0.0;
};

struct EvalReport {
  int scenes = 0;
  std::vector<KMetrics> by_k;
  // Argmax of the predecessor distribution against the nearest-trace labels,
  // over future steps that have a label. Absent with tracing disabled.
  std::optional<double> predecessor_accuracy;
  // Same argmax against planted predecessors, when truth was supplied.
  std::optional<double> truth_accuracy;
  double empty_rate = 0.0;  // fraction of scenes in rollback mode
  double wall_seconds = 0.0;

  const KMetrics& at_k(int k) const;
  // Timing is left out unless asked for so reports stay reproducible.
  nlohmann::json to_json(bool with_timing = false) const;
  std::string to_text(bool with_timing = false) const;
};

// truth, when given, holds the planted predecessor per scene and future step
// (-1 for none).
EvalReport evaluate(const Model& model, const std::vector<Scene>& scenes,
                    const std::vector<int>& ks,
                    const std::vector<std::vector<int>>* truth = nullptr);

// Same metrics from precomputed predictions.
EvalReport evaluate_predictions(const std::vector<Prediction>& predictions,
                                const std::vector<Scene>& scenes, const std::vector<int>& ks,
                                const std::vector<std::vector<int>>* truth = nullptr);

// Top-1 of a predecessor probability row among candidates; -1 without any.
int argmax_candidate(const nn::Matrix& probs, int step, const nn::Mask& candidates);

// ---- training ------------------------------------------------------------

struct EpochLog {
  int epoch = 0;
  LossBundle mean;          // training losses averaged over scenes
  double val_made = 0.0;    // NaN without a validation split
};

struct TrainResult {
  Model model;              // parameters from the best validation epoch
  std::vector<EpochLog> curve;
  int best_epoch = 0;
  bool early_stopped = false;
  int train_scenes = 0;
  int val_scenes = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Adam over shuffled minibatches. Throws Divergence on a non-finite loss.
TrainResult train(const TrainConfig& config, const std::vector<Scene>& scenes,
                  const EpochCallback& on_epoch = {});

// epoch,l_pns,l_cls,l_nll,total,val_made
std::string loss_curve_csv(const std::vector<EpochLog>& curve);

}  // namespace pns
