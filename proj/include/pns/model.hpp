#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "pns/autodiff.hpp"
#include "pns/config.hpp"
#include "pns/layers.hpp"
#include "pns/mdn.hpp"
#include "pns/params.hpp"
#include "pns/scene.hpp"
#include "pns/tracing.hpp"

namespace pns {

// Loss targets that depend on the model's own output: the best mode and the
// soft classification targets. They carry no gradient, so gradient checks
// freeze them at the unperturbed values.
struct LossTargets {
  int best_mode = -1;
  Eigen::RowVectorXd cls;
};

// Tape handles and side data from one scene's forward pass.
struct SceneForward {
  MixtureVars mixture;
  std::optional<nn::Var> pred_probs;  // t_f x agents; absent with tracing disabled
  nn::Mask candidates;
  PredecessorLabels labels;
  TopKSelection selection;
  bool rollback = false;

  // Populated when the forward pass was asked for losses.
  std::optional<nn::Var> l_pns, l_cls, l_nll, total;
  LossTargets targets;
};

// Denormalized model output for one scene.
struct Prediction {
  std::vector<std::vector<Point>> modes;  // M x t_f, world coordinates
  Eigen::RowVectorXd mode_probs;
  nn::Matrix scales;                      // t_f x 2M
  nn::Matrix pred_probs;                  // t_f x agents; empty with tracing disabled
  nn::Mask candidates;
  PredecessorLabels labels;
  bool rollback = false;
};

// Structured export: M trajectories (t_f x 2, world coordinates), mode
// probabilities, and the predecessor distribution when tracing is on.
nlohmann::json to_json(const Prediction& prediction);
// {"format": "pns-predictions", "version": 1, "scenes": [...]}
nlohmann::json predictions_document(const std::vector<Prediction>& predictions);

class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  // The scene must already be normalized. Losses are recorded when with_loss.
  SceneForward forward(nn::Tape& tape, const Scene& normalized, bool with_loss,
                       const LossTargets* frozen = nullptr) const;

  // Normalizes, runs, and maps the locations back to world coordinates.
  Prediction predict(const Scene& scene) const;

  // Accumulates d(total)/d(params) for one scene into grads and returns the
  // loss values.
  LossBundle loss_and_grad(const Scene& scene, nn::GradBuffer& grads) const;
  LossBundle loss(const Scene& scene) const;

  nlohmann::json checkpoint() const;
  static Model from_checkpoint(const nlohmann::json& doc);

  // Candidate mask the model uses for a scene (default rule, then the filter).
  nn::Mask candidates_for(const Scene& scene) const;

 private:
  void build();

  ModelConfig config_;
  nn::ParamStore store_;
  nn::Mlp embed_;
  nn::GruCell encoder_;
  nn::SelfAttentionBlock interaction_;
  RelationEncoder relation_;
  InfluenceScorer scorer_;
  MdnDecoder decoder_;
};

// Successor future in the scene's own coordinates, t_f x 2.
Future successor_future(const Scene& scene);

}  // namespace pns
