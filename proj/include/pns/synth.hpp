#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pns/scene.hpp"

namespace pns {

enum class PathFamily { kStraight, kArc, kSCurve, kBranch };

std::string to_string(PathFamily family);
// Throws ConfigError for unknown names.
PathFamily path_family_from_string(const std::string& name);

struct SynthParams {
  int n_distractors = 2;
  int follow_delay = 4;  // steps the successor lags its leader
  double noise_sigma = 0.0;
  PathFamily path_family = PathFamily::kStraight;
  std::uint64_t seed = 0;
  // Minimum distance between any distractor position and any position of the
  // leaders or the successor. Negative selects the automatic radius
  // max(5 * delay * speed * dt, speed * dt * t_f) + 1.
  double exclusion_radius = -1.0;
  // Leader speed in m/s; non-positive draws it from [0.8, 1.6].
  double speed = -1.0;
  // Branch scenes only: both leaders move at the same speed.
  bool equal_leader_speeds = false;
  int t_h = 8;
  int t_f = 12;
  double dt = 0.4;

  void validate() const;
};

struct SynthScene {
  Scene scene;
  // Agent index of the planted predecessor for each future step, -1 for none.
  std::vector<int> true_predecessor;
  PathFamily family = PathFamily::kStraight;
  int follow_delay = 0;
  // Branch scenes: agent indices of both leaders and the junction step.
  std::vector<int> leaders;
  int junction_step = -1;
};

// A leader walks a path of the requested family (branch is treated as arc);
// the successor replays it follow_delay steps later plus Gaussian noise.
SynthScene gen_follow_scene(const SynthParams& params);

// Two leaders share a trunk and diverge at a junction; the successor follows
// one of them, chosen by the seed. The followed leader is the faster of the two.
SynthScene gen_branch_scene(const SynthParams& params);

// Dispatches on params.path_family.
SynthScene gen_scene(const SynthParams& params);

struct SynthDatasetSpec {
  int scenes = 100;
  std::uint64_t seed = 0;
  std::vector<PathFamily> families = {PathFamily::kStraight, PathFamily::kArc,
                                      PathFamily::kSCurve, PathFamily::kBranch};
  int min_delay = 2;
  int max_delay = 6;
  int min_distractors = 1;
  int max_distractors = 4;
  double noise_sigma = 0.0;
  double exclusion_radius = -1.0;
  int t_h = 8;
  int t_f = 12;
  double dt = 0.4;
};

// Scene i uses family families[i % size] and a seed derived from (seed, i).
std::vector<SynthScene> gen_dataset(const SynthDatasetSpec& spec);

std::vector<Scene> scenes_of(const std::vector<SynthScene>& synth);

// Sidecar document with the planted predecessors, aligned with the archive.
nlohmann::json truth_sidecar(const std::vector<SynthScene>& synth);
std::vector<std::vector<int>> truth_from_sidecar(const nlohmann::json& doc);

}  // namespace pns
