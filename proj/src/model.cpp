#include "pns/model.hpp"

#include <random>

#include "pns/errors.hpp"

namespace pns {

using nn::Mask;
using nn::Matrix;
using nn::Tape;
using nn::Var;

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  build();
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : Model(config) {
  std::mt19937_64 rng(seed);
  store_.init_glorot(rng);
}

void Model::build() {
  const int d = config_.hidden;
  embed_ = nn::Mlp::create(store_, "embed", {kFeatureDim, d, d});
  encoder_ = nn::GruCell::create(store_, "encoder", d, d);
  interaction_ = nn::SelfAttentionBlock::create(store_, "interaction", d);
  relation_ = RelationEncoder::create(store_, "relation", d);
  if (config_.pt_enabled) {
    scorer_ = InfluenceScorer::create(store_, "influence", d, config_.attention_axis);
  }
  decoder_ = MdnDecoder::create(store_, "decoder", d + config_.top_k * (d + 1), d, config_.modes,
                                config_.scale_eps);
}

Mask Model::candidates_for(const Scene& scene) const {
  if (config_.filter) return candidate_filter(scene, *config_.filter);
  return default_candidates(scene);
}

Future successor_future(const Scene& scene) {
  Future y(scene.t_f, 2);
  for (int k = 0; k < scene.t_f; ++k) {
    const Point p = scene.at(scene.target_index, scene.t_h + k);
    y(k, 0) = p.x;
    y(k, 1) = p.y;
  }
  return y;
}

SceneForward Model::forward(Tape& tape, const Scene& scene, bool with_loss,
                            const LossTargets* frozen) const {
  if (scene.t_h != config_.t_h || scene.t_f != config_.t_f) {
    throw ShapeMismatch("scene horizons do not match the model configuration");
  }
  const int n = scene.num_agents();
  const int t_h = scene.t_h;
  const int t_f = scene.t_f;
  const int succ = scene.target_index;

  // Features as rows t * n + a.
  const std::vector<double> feats = observation_features(scene);
  Matrix x(static_cast<Eigen::Index>(t_h) * n, kFeatureDim);
  for (int a = 0; a < n; ++a) {
    for (int t = 0; t < t_h; ++t) {
      for (int c = 0; c < kFeatureDim; ++c) {
        x(t * n + a, c) = feats[(static_cast<std::size_t>(a) * t_h + t) * kFeatureDim + c] *
                          config_.input_scale;
      }
    }
  }
  Var embedded = embed_(tape, store_, tape.constant(std::move(x)));

  Var h = tape.constant(Matrix::Zero(n, config_.hidden));
  std::vector<Var> hidden;
  hidden.reserve(t_h);
  for (int t = 0; t < t_h; ++t) {
    Mask present(n);
    for (int a = 0; a < n; ++a) present[a] = scene.present(a, t) ? 1 : 0;
    h = encoder_.step(tape, store_, nn::slice_rows(embedded, t * n, n), h, present);
    h = interaction_(tape, store_, h, present);
    hidden.push_back(h);
  }
  Var final_hidden = hidden.back();

  std::vector<int> succ_rows(t_h);
  for (int t = 0; t < t_h; ++t) succ_rows[t] = t * n + succ;
  Var successor_obs = nn::gather_rows(nn::concat_rows(hidden), succ_rows);

  std::vector<Var> relation = relation_(tape, store_, final_hidden, t_f);
  std::vector<Var> succ_rel_rows;
  succ_rel_rows.reserve(t_f);
  for (int t = 0; t < t_f; ++t) succ_rel_rows.push_back(nn::slice_rows(relation[t], succ, 1));
  Var successor_rel = nn::concat_rows(succ_rel_rows);

  SceneForward out;
  out.candidates = candidates_for(scene);
  out.labels = label_predecessors(scene, out.candidates, config_.metric);
  bool any_candidate = false;
  for (auto c : out.candidates) any_candidate = any_candidate || c;
  out.rollback = !any_candidate;

  const int agg_cols = config_.top_k * (config_.hidden + 1);
  Var aggregate;
  std::optional<Var> pns_term;
  if (config_.pt_enabled) {
    Var logits = scorer_(tape, store_, succ, successor_obs, relation);
    Var probs = predecessor_probs(logits, out.candidates);
    out.pred_probs = probs;
    out.selection = select_topk(probs.value(), out.candidates, config_.top_k);
    if (out.rollback) {
      aggregate = tape.constant(Matrix::Zero(t_f, agg_cols));
    } else {
      aggregate = topk_aggregate(probs, relation, out.selection);
    }
    if (with_loss) {
      pns_term = pns_loss(probs, one_hot(out.labels, n), out.candidates, config_.pns_loss);
    }
  } else {
    aggregate = tape.constant(Matrix::Zero(t_f, agg_cols));
  }

  out.mixture = decoder_(tape, store_, successor_rel, aggregate,
                         nn::slice_rows(final_hidden, succ, 1));

  if (with_loss) {
    const Future y = successor_future(scene);
    if (frozen) {
      out.targets = *frozen;
    } else {
      const LaplaceMixture mix = out.mixture.values();
      out.targets.best_mode = best_mode(mix, y);
      out.targets.cls = soft_targets(mix, y, config_.soft_target_tau);
    }
    out.l_nll = laplace_nll(out.mixture.mu, out.mixture.b, y, out.targets.best_mode);
    out.l_cls = cls_loss(out.targets.cls, out.mixture.mode_probs);
    out.l_pns = pns_term ? *pns_term : tape.constant(Matrix::Zero(1, 1));
    out.total = total_loss(*out.l_pns, *out.l_cls, *out.l_nll, config_.lambda);
  }
  return out;
}

Prediction Model::predict(const Scene& scene) const {
  const NormalizedScene ns = normalize(scene);
  Tape tape;
  const SceneForward fw = forward(tape, ns.scene, false);
  const LaplaceMixture mix = fw.mixture.values();
  Prediction p;
  p.modes.assign(mix.modes(), std::vector<Point>(mix.steps()));
  for (int m = 0; m < mix.modes(); ++m) {
    for (int t = 0; t < mix.steps(); ++t) p.modes[m][t] = mix.location(m, t) + ns.record.offset;
  }
  p.mode_probs = mix.mode_probs;
  p.scales = mix.b;
  if (fw.pred_probs) p.pred_probs = fw.pred_probs->value();
  p.candidates = fw.candidates;
  p.labels = fw.labels;
  p.rollback = fw.rollback;
  return p;
}

LossBundle Model::loss_and_grad(const Scene& scene, nn::GradBuffer& grads) const {
  const NormalizedScene ns = normalize(scene);
  Tape tape;
  const SceneForward fw = forward(tape, ns.scene, true);
  tape.backward(*fw.total);
  tape.accumulate(grads);
  return {fw.l_pns->value()(0, 0), fw.l_nll->value()(0, 0), fw.l_cls->value()(0, 0),
          fw.total->value()(0, 0)};
}

LossBundle Model::loss(const Scene& scene) const {
  const NormalizedScene ns = normalize(scene);
  Tape tape;
  const SceneForward fw = forward(tape, ns.scene, true);
  return {fw.l_pns->value()(0, 0), fw.l_nll->value()(0, 0), fw.l_cls->value()(0, 0),
          fw.total->value()(0, 0)};
}

nlohmann::json Model::checkpoint() const {
  return {{"format", "pns-checkpoint"},
          {"version", 1},
          {"config", config_.to_json()},
          {"params", store_.to_json()}};
}

Model Model::from_checkpoint(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != "pns-checkpoint") {
    throw ConfigError("not a pns checkpoint");
  }
  if (doc.value("version", 0) != 1) throw ConfigError("unsupported checkpoint version");
  Model m(ModelConfig::from_json(doc.at("config")));
  m.store_.load_json(doc.at("params"));
  return m;
}

nlohmann::json to_json(const Prediction& prediction) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& mode : prediction.modes) {
    nlohmann::json traj = nlohmann::json::array();
    for (const auto& p : mode) traj.push_back({p.x, p.y});
    modes.push_back(traj);
  }
  std::vector<double> probs(prediction.mode_probs.data(),
                            prediction.mode_probs.data() + prediction.mode_probs.size());
  nlohmann::json out = {{"modes", modes}, {"mode_probs", probs}, {"rollback", prediction.rollback}};
  if (prediction.pred_probs.size() > 0) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index t = 0; t < prediction.pred_probs.rows(); ++t) {
      std::vector<double> row(static_cast<std::size_t>(prediction.pred_probs.cols()));
      for (Eigen::Index a = 0; a < prediction.pred_probs.cols(); ++a) {
        row[static_cast<std::size_t>(a)] = prediction.pred_probs(t, a);
      }
      rows.push_back(row);
    }
    out["predecessor_probs"] = rows;
  }
  return out;
}

nlohmann::json predictions_document(const std::vector<Prediction>& predictions) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& p : predictions) scenes.push_back(to_json(p));
  return {{"format", "pns-predictions"}, {"version", 1}, {"scenes", scenes}};
}

}  // namespace pns
