#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pns/autodiff.hpp"
#include "pns/layers.hpp"
#include "pns/scene.hpp"

namespace pns {

enum class DistanceMetric { kL1, kL2 };
std::string to_string(DistanceMetric metric);
DistanceMetric distance_metric_from_string(const std::string& name);

// Point distance used by the labeler. L2 is sqrt(dx*dx + dy*dy).
double point_distance(Point a, Point b, DistanceMetric metric);

// Where the predecessor query attends: the successor's observed hidden
// sequence, or only the successor's encoding at the same future step.
enum class AttentionAxis { kTemporal, kSingle };
std::string to_string(AttentionAxis axis);
AttentionAxis attention_axis_from_string(const std::string& name);

enum class PnsLossKind { kBinary, kCategorical };
std::string to_string(PnsLossKind kind);
PnsLossKind pns_loss_kind_from_string(const std::string& name);

// ---- relation encodings --------------------------------------------------

// Dedicated GRU unrolled over the future horizon from each agent's last
// observed hidden state, driven by a learned constant input.
struct RelationEncoder {
  nn::GruCell gru;
  int input = -1;  // 1 x d constant input

  static RelationEncoder create(nn::ParamStore& store, const std::string& name, int dim);
  // final_hidden: agents x d. Returns t_f matrices of agents x d.
  std::vector<nn::Var> operator()(nn::Tape& tape, const nn::ParamStore& store,
                                  nn::Var final_hidden, int t_f) const;
};

// ---- influence logits ----------------------------------------------------

// Cross-attention (query from the candidate, key/value from the successor)
// followed by an MLP over [h_i, h_p, s_ip].
struct InfluenceScorer {
  int wq = -1, wk = -1, wv = -1;
  nn::Mlp mlp;
  AttentionAxis axis = AttentionAxis::kTemporal;

  static InfluenceScorer create(nn::ParamStore& store, const std::string& name, int dim,
                                AttentionAxis axis);

  // Logits for every (future step, agent) pair: t_f x agents. successor_obs is
  // the successor's observed hidden sequence (t_h x d); relation holds one
  // agents x d matrix per future step.
  nn::Var operator()(nn::Tape& tape, const nn::ParamStore& store, int successor,
                     nn::Var successor_obs, const std::vector<nn::Var>& relation) const;
};

// Logit of a single (successor, candidate) pair at one step: h_i and h_p are
// 1 x d, successor_keys is the key/value source (rows x d).
nn::Var influence_logit(nn::Tape& tape, const nn::ParamStore& store, const InfluenceScorer& scorer,
                        nn::Var h_i, nn::Var h_p, nn::Var successor_keys);

// ---- distribution --------------------------------------------------------

struct PredecessorDistribution {
  nn::Matrix probs;             // t_f x agents; masked columns are exactly 0
  nn::Mask candidate_mask;      // per agent; successor always 0
  std::optional<nn::Matrix> gt_labels;  // t_f x agents one-hot
  bool rollback = false;        // no candidate: condition on the past only
};

// Row-wise masked softmax. With no candidates the rows are all zero and the
// rollback flag is set.
PredecessorDistribution predecessor_distribution(const nn::Matrix& logits,
                                                 const nn::Mask& candidate_mask);
// Differentiable form; returns an all-zero constant in rollback mode.
nn::Var predecessor_probs(nn::Var logits, const nn::Mask& candidate_mask);

// ---- labeling ------------------------------------------------------------

struct PredecessorLabels {
  std::vector<int> agent;         // per future step; -1 when no candidate
  std::vector<double> distance;   // phi at the labeled agent
};

// For each future step, labels the candidate whose present observed positions
// come closest to the successor's position at that step. Ties go to the lowest
// agent index.
PredecessorLabels label_predecessors(const Scene& scene, const nn::Mask& candidate_mask,
                                     DistanceMetric metric);

nn::Matrix one_hot(const PredecessorLabels& labels, int agents);

// ---- top-K ---------------------------------------------------------------

// Per step, the agent indices of the K most probable candidates in
// descending order (ties by ascending index); -1 pads missing slots.
using TopKSelection = std::vector<std::vector<int>>;

TopKSelection select_topk(const nn::Matrix& probs, const nn::Mask& candidate_mask, int k);

// Rows are steps; each row concatenates (h_p, prob_p) for the selected slots,
// giving t_f x K (d + 1). Padded slots are zero.
nn::Var topk_aggregate(nn::Var probs, const std::vector<nn::Var>& relation,
                       const TopKSelection& selection);

// ---- loss ----------------------------------------------------------------

// Binary: per-candidate cross-entropy summed over candidates and steps.
// Categorical: -log p(label) summed over steps. The arguments p and 1 - p are
// floored at 1e-12 before the log; steps without a label contribute 0.
nn::Var pns_loss(nn::Var probs, const nn::Matrix& labels, const nn::Mask& candidate_mask,
                 PnsLossKind kind = PnsLossKind::kBinary);

// ---- candidate filter ----------------------------------------------------

struct CandidateFilter {
  double d_max = 20.0;   // meters
  double fov_deg = 90.0; // half-angle around the successor heading
};

// Starts from default_candidates(scene) and keeps agents whose last observed
// position lies within d_max of the successor's and within +-fov of its
// heading. A successor without motion over its last two observed steps sees
// the full circle.
nn::Mask candidate_filter(const Scene& scene, const CandidateFilter& filter);

}  // namespace pns
