#include "pns/train_eval.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "pns/errors.hpp"
#include "pns/kernels.hpp"
#include "pns/metrics.hpp"

namespace pns {

const KMetrics& EvalReport::at_k(int k) const {
  for (const auto& m : by_k) {
    if (m.k == k) return m;
  }
  throw ConfigError("report has no K=" + std::to_string(k));
}

nlohmann::json EvalReport::to_json(bool with_timing) const {
  nlohmann::json j;
  j["scenes"] = scenes;
  j["metrics"] = nlohmann::json::array();
  for (const auto& m : by_k) j["metrics"].push_back({{"k", m.k}, {"made", m.made}, {"mfde", m.mfde}});
  j["predecessor_accuracy"] =
      predecessor_accuracy ? nlohmann::json(*predecessor_accuracy) : nlohmann::json(nullptr);
  if (truth_accuracy) j["truth_accuracy"] = *truth_accuracy;
  j["empty_rate"] = empty_rate;
  if (with_timing) j["wall_seconds"] = wall_seconds;
  return j;
}

std::string EvalReport::to_text(bool with_timing) const {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-6s %10s %10s\n", "K", "mADE", "mFDE");
  os << buf;
  for (const auto& m : by_k) {
    std::snprintf(buf, sizeof buf, "%-6d %10.4f %10.4f\n", m.k, m.made, m.mfde);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-22s %d\n", "scenes", scenes);
  os << buf;
  if (predecessor_accuracy) {
    std::snprintf(buf, sizeof buf, "%-22s %.4f\n", "predecessor accuracy", *predecessor_accuracy);
  } else {
    std::snprintf(buf, sizeof buf, "%-22s %s\n", "predecessor accuracy", "n/a");
  }
  os << buf;
  if (truth_accuracy) {
    std::snprintf(buf, sizeof buf, "%-22s %.4f\n", "planted accuracy", *truth_accuracy);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-22s %.4f\n", "empty rate", empty_rate);
  os << buf;
  if (with_timing) {
    std::snprintf(buf, sizeof buf, "%-22s %.3f\n", "wall seconds", wall_seconds);
    os << buf;
  }
  return os.str();
}

int argmax_candidate(const nn::Matrix& probs, int step, const nn::Mask& candidates) {
  int best = -1;
  for (int a = 0; a < static_cast<int>(candidates.size()); ++a) {
    if (!candidates[a]) continue;
    if (best < 0 || probs(step, a) > probs(step, best)) best = a;
  }
  return best;
}

EvalReport evaluate_predictions(const std::vector<Prediction>& predictions,
                                const std::vector<Scene>& scenes, const std::vector<int>& ks,
                                const std::vector<std::vector<int>>* truth) {
  if (predictions.size() != scenes.size()) throw ShapeMismatch("one prediction per scene expected");
  if (truth && truth->size() != scenes.size()) throw ShapeMismatch("one truth row per scene expected");
  EvalReport r;
  r.scenes = static_cast<int>(scenes.size());
  for (int k : ks) r.by_k.push_back({k, 0.0, 0.0});
  long label_hits = 0, label_total = 0, truth_hits = 0, truth_total = 0, empty = 0;
  bool has_probs = false;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Prediction& p = predictions[i];
    const Trajectory gt = future_of(scenes[i]);
    for (auto& m : r.by_k) {
      m.made += made_k(p.modes, p.mode_probs, gt, m.k);
      m.mfde += mfde_k(p.modes, p.mode_probs, gt, m.k);
    }
    if (p.rollback) ++empty;
    if (p.pred_probs.size() == 0) continue;
    has_probs = true;
    for (int t = 0; t < scenes[i].t_f; ++t) {
      const int guess = argmax_candidate(p.pred_probs, t, p.candidates);
      if (p.labels.agent[t] >= 0) {
        ++label_total;
        label_hits += guess == p.labels.agent[t];
      }
      if (truth && (*truth)[i][t] >= 0) {
        ++truth_total;
        truth_hits += guess == (*truth)[i][t];
      }
    }
  }
  if (!scenes.empty()) {
    for (auto& m : r.by_k) {
      m.made /= static_cast<double>(scenes.size());
      m.mfde /= static_cast<double>(scenes.size());
    }
    r.empty_rate = static_cast<double>(empty) / static_cast<double>(scenes.size());
  }
  if (has_probs) {
    r.predecessor_accuracy =
        label_total ? static_cast<double>(label_hits) / static_cast<double>(label_total) : 0.0;
    if (truth) {
      r.truth_accuracy =
          truth_total ? static_cast<double>(truth_hits) / static_cast<double>(truth_total) : 0.0;
    }
  }
  return r;
}

EvalReport evaluate(const Model& model, const std::vector<Scene>& scenes,
                    const std::vector<int>& ks, const std::vector<std::vector<int>>* truth) {
  const auto start = std::chrono::steady_clock::now();
  for (int k : ks) {
    if (k > model.config().modes) {
      throw KExceedsM("K=" + std::to_string(k) + " exceeds M=" + std::to_string(model.config().modes));
    }
  }
  EvalReport r = evaluate_predictions(predict_batch(model, scenes), scenes, ks, truth);
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace pns
