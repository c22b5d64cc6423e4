#include "pns/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pns/errors.hpp"

namespace pns {

std::vector<int> rank_modes(const Eigen::RowVectorXd& probs) {
  std::vector<int> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs(a) > probs(b); });
  return order;
}

double average_displacement(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size() || gt.empty()) throw ShapeMismatch("trajectory lengths differ");
  double s = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) s += l2(pred[t], gt[t]);
  return s / static_cast<double>(gt.size());
}

double final_displacement(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size() || gt.empty()) throw ShapeMismatch("trajectory lengths differ");
  return l2(pred.back(), gt.back());
}

namespace {

template <typename F>
double min_over_top_k(const std::vector<Trajectory>& modes, const Eigen::RowVectorXd& probs, int k,
                      F&& err) {
  if (static_cast<Eigen::Index>(modes.size()) != probs.size()) {
    throw ShapeMismatch("mode count differs from probability count");
  }
  if (k < 1) throw ConfigError("K must be >= 1");
  if (k > static_cast<int>(modes.size())) {
    throw KExceedsM("K=" + std::to_string(k) + " exceeds M=" + std::to_string(modes.size()));
  }
  const std::vector<int> order = rank_modes(probs);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) best = std::min(best, err(modes[order[i]]));
  return best;
}

}  // namespace

double made_k(const std::vector<Trajectory>& modes, const Eigen::RowVectorXd& probs,
              const Trajectory& gt, int k) {
  return min_over_top_k(modes, probs, k,
                        [&](const Trajectory& m) { return average_displacement(m, gt); });
}

double mfde_k(const std::vector<Trajectory>& modes, const Eigen::RowVectorXd& probs,
              const Trajectory& gt, int k) {
  return min_over_top_k(modes, probs, k,
                        [&](const Trajectory& m) { return final_displacement(m, gt); });
}

Trajectory future_of(const Scene& scene) {
  Trajectory out;
  out.reserve(scene.t_f);
  for (int k = 0; k < scene.t_f; ++k) out.push_back(scene.at(scene.target_index, scene.t_h + k));
  return out;
}

}  // namespace pns
