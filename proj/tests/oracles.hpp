#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "pns/scene.hpp"

namespace pns::oracle {

inline double point_distance(Point a, Point b, bool l1) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return l1 ? std::abs(dx) + std::abs(dy) : std::hypot(dx, dy);
}

// Exhaustive per-(step, candidate, observed step) labeling.
inline std::vector<int> brute_force_labels(const Scene& s, const std::vector<std::uint8_t>& mask,
                                           bool l1) {
  std::vector<int> out;
  for (int k = 0; k < s.t_f; ++k) {
    const Point y = s.positions[s.target_index][s.t_h + k];
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < s.num_agents(); ++a) {
      if (!mask[a]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (int t = 0; t < s.t_h; ++t) {
        if (s.presence[a][t]) d = std::min(d, point_distance(y, s.positions[a][t], l1));
      }
      if (d < best_d) {
        best_d = d;
        best = a;
      }
    }
    out.push_back(best);
  }
  return out;
}

// Candidates sorted by probability (descending, ties by index), truncated to k
// and padded with -1.
inline std::vector<int> sort_topk(const Eigen::RowVectorXd& probs,
                                  const std::vector<std::uint8_t>& mask, int k) {
  std::vector<int> idx;
  for (int a = 0; a < probs.size(); ++a) {
    if (mask[a]) idx.push_back(a);
  }
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return probs(a) != probs(b) ? probs(a) > probs(b) : a < b;
  });
  idx.resize(static_cast<std::size_t>(k), -1);
  return idx;
}

// Minimum over the k most probable modes, enumerating every mode and step.
struct MinErrors {
  double ade;
  double fde;
};

inline MinErrors brute_force_min_errors(const std::vector<std::vector<Point>>& modes,
                                        const std::vector<double>& probs,
                                        const std::vector<Point>& gt, int k) {
  std::vector<int> order(modes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
  MinErrors best{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (int r = 0; r < k; ++r) {
    const auto& m = modes[static_cast<std::size_t>(order[r])];
    double total = 0;
    for (std::size_t t = 0; t < gt.size(); ++t) total += point_distance(m[t], gt[t], false);
    best.ade = std::min(best.ade, total / static_cast<double>(gt.size()));
    best.fde = std::min(best.fde, point_distance(m.back(), gt.back(), false));
  }
  return best;
}

}  // namespace pns::oracle
