#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pns/scene.hpp"
#include "pns/synth.hpp"

namespace pns::testing {

// Random scene with partially observed neighbors. The successor is present
// everywhere; neighbors have random gaps.
inline Scene random_scene(std::mt19937_64& rng, int agents, int t_h = 8, int t_f = 12) {
  std::uniform_real_distribution<double> pos(-10.0, 10.0);
  std::bernoulli_distribution keep(0.8);
  Scene s;
  s.t_h = t_h;
  s.t_f = t_f;
  s.target_index = 0;
  for (int a = 0; a < agents; ++a) {
    s.agent_ids.push_back(a + 1);
    std::vector<Point> p(static_cast<std::size_t>(t_h + t_f));
    std::vector<std::uint8_t> m(p.size());
    for (std::size_t t = 0; t < p.size(); ++t) {
      m[t] = a == 0 || keep(rng);
      if (m[t]) p[t] = {pos(rng), pos(rng)};
    }
    s.positions.push_back(p);
    s.presence.push_back(m);
  }
  return s;
}

// Overwrites the padding of absent steps with arbitrary values.
inline Scene scramble_padding(Scene s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> junk(-1e6, 1e6);
  for (int a = 0; a < s.num_agents(); ++a) {
    for (int t = 0; t < s.num_steps(); ++t) {
      if (!s.present(a, t)) s.positions[a][t] = {junk(rng), junk(rng)};
    }
  }
  return s;
}

inline std::vector<Scene> follow_scenes(int n, std::uint64_t seed) {
  SynthDatasetSpec spec;
  spec.scenes = n;
  spec.seed = seed;
  spec.families = {PathFamily::kStraight, PathFamily::kArc, PathFamily::kSCurve};
  return scenes_of(gen_dataset(spec));
}

}  // namespace pns::testing
