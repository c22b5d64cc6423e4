#pragma once

#include <vector>

#include <Eigen/Core>

#include "pns/scene.hpp"

namespace pns {

using Trajectory = std::vector<Point>;

// Mode indices sorted by probability, highest first; ties to the lower index.
std::vector<int> rank_modes(const Eigen::RowVectorXd& mode_probs);

// Mean per-step and final-step L2 error of one trajectory.
double average_displacement(const Trajectory& pred, const Trajectory& gt);
double final_displacement(const Trajectory& pred, const Trajectory& gt);

// Minimum over the K most probable modes. Throws KExceedsM when K exceeds the
// number of modes.
double made_k(const std::vector<Trajectory>& modes, const Eigen::RowVectorXd& mode_probs,
              const Trajectory& gt, int k);
double mfde_k(const std::vector<Trajectory>& modes, const Eigen::RowVectorXd& mode_probs,
              const Trajectory& gt, int k);

// Ground-truth future of the scene's successor.
Trajectory future_of(const Scene& scene);

}  // namespace pns
