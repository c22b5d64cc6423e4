#include <doctest.h>

#include <random>

#include "pns/errors.hpp"
#include "pns/scene.hpp"
#include "support.hpp"

using namespace pns;

namespace {

AgentTrack full_track(int id, int steps, Point start, Point vel) {
  AgentTrack t{id, {}};
  for (int k = 0; k < steps; ++k) t.samples.push_back({k, {start.x + k * vel.x, start.y + k * vel.y}});
  return t;
}

}  // namespace

TEST_CASE("build_scene with a single full track has no neighbors") {
  const Scene s = build_scene({full_track(4, 20, {0, 0}, {1, 0})}, 4, 8, 12);
  CHECK(s.num_agents() == 1);
  CHECK(s.num_steps() == 20);
  CHECK(s.target_index == 0);
  CHECK(default_candidates(s) == std::vector<std::uint8_t>{0});
  CHECK_NOTHROW(validate(s));
}

TEST_CASE("build_scene masks the steps a neighbor is missing") {
  AgentTrack partial{9, {}};
  for (int k = 0; k <= 5; ++k) partial.samples.push_back({k, {1.0 * k, 1.0}});
  const Scene s =
      build_scene({full_track(1, 20, {0, 0}, {1, 0}), partial, full_track(3, 20, {5, 5}, {0, 1})},
                  1, 8, 12);
  const int idx = 1;
  REQUIRE(s.agent_ids[idx] == 9);
  for (int t = 0; t < 20; ++t) CHECK(s.present(idx, t) == (t <= 5));
  CHECK(s.observed_count(idx) == 6);
}

TEST_CASE("build_scene errors") {
  CHECK_THROWS_AS(build_scene({full_track(1, 20, {0, 0}, {1, 0})}, 1, 0, 12), EmptyGrid);
  CHECK_THROWS_AS(build_scene({full_track(1, 20, {0, 0}, {1, 0})}, 1, 8, 0), EmptyGrid);
  CHECK_THROWS_AS(build_scene({full_track(1, 19, {0, 0}, {1, 0})}, 1, 8, 12), MissingTarget);
  CHECK_THROWS_AS(build_scene({full_track(1, 20, {0, 0}, {1, 0})}, 2, 8, 12), MissingTarget);
}

TEST_CASE("random scenes round-trip through both serializations") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Scene s = testing::random_scene(rng, 6);
    CHECK(scene_from_text(to_text(s)) == s);
    CHECK(scene_from_json(to_json(s)) == s);
  }
}

TEST_CASE("normalize shifts by the successor's last observed position") {
  Scene s = build_scene({full_track(1, 20, {-4, 0}, {1, 0}), full_track(2, 20, {0, 10}, {0, 0})},
                        1, 8, 12);
  // Successor at (3, 4) at the last observed step.
  for (int t = 0; t < 20; ++t) s.positions[0][t] = {3.0 + (t - 7), 4.0};
  const auto n = normalize(s);
  CHECK(n.record.offset == Point{3.0, 4.0});
  CHECK(n.scene.at(0, 7) == Point{0.0, 0.0});
  CHECK(n.scene.at(1, 0) == Point{-3.0, 6.0});
  const Scene back = denormalize(n.scene, n.record);
  for (int a = 0; a < 2; ++a) {
    for (int t = 0; t < 20; ++t) {
      CHECK(std::abs(back.at(a, t).x - s.at(a, t).x) <= 1e-12);
      CHECK(std::abs(back.at(a, t).y - s.at(a, t).y) <= 1e-12);
    }
  }
}

TEST_CASE("constant velocity gives constant displacement features after the first step") {
  const Scene s = build_scene({full_track(1, 20, {2, -1}, {0.4, 0.3})}, 1, 8, 12);
  const auto f = observation_features(normalize(s).scene);
  REQUIRE(f.size() == static_cast<std::size_t>(8 * kFeatureDim));
  CHECK(f[2] == 0.0);
  CHECK(f[3] == 0.0);
  for (int t = 1; t < 8; ++t) {
    CHECK(f[t * kFeatureDim + 2] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(f[t * kFeatureDim + 3] == doctest::Approx(0.3).epsilon(1e-12));
  }
}

TEST_CASE("displacement is zero after a gap") {
  std::mt19937_64 rng(3);
  Scene s = testing::random_scene(rng, 3);
  s.presence[1] = std::vector<std::uint8_t>(20, 1);
  s.presence[1][3] = 0;
  const auto f = observation_features(s);
  const int base = (1 * 8 + 4) * kFeatureDim;
  CHECK(f[base + 2] == 0.0);
  CHECK(f[base + 3] == 0.0);
  const int gap = (1 * 8 + 3) * kFeatureDim;
  for (int k = 0; k < kFeatureDim; ++k) CHECK(f[gap + k] == 0.0);
}

TEST_CASE("normalized coordinates are translation invariant") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> shift(-100, 100);
  for (int trial = 0; trial < 100; ++trial) {
    const Scene s = testing::random_scene(rng, 5);
    Scene moved = s;
    const Point v{shift(rng), shift(rng)};
    for (auto& track : moved.positions) {
      for (auto& p : track) p = p + v;
    }
    const Scene a = normalize(s).scene;
    const Scene b = normalize(moved).scene;
    for (int ag = 0; ag < s.num_agents(); ++ag) {
      for (int t = 0; t < s.num_steps(); ++t) {
        if (!s.present(ag, t)) continue;
        CHECK(std::abs(a.at(ag, t).x - b.at(ag, t).x) < 1e-9);
        CHECK(std::abs(a.at(ag, t).y - b.at(ag, t).y) < 1e-9);
      }
    }
  }
}

TEST_CASE("features and candidates ignore padding values") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Scene s = testing::random_scene(rng, 5);
    const Scene junk = testing::scramble_padding(s, rng);
    CHECK(observation_features(normalize(s).scene) == observation_features(normalize(junk).scene));
    CHECK(default_candidates(s) == default_candidates(junk));
  }
}

TEST_CASE("candidates need two observed steps and exclude the successor") {
  std::mt19937_64 rng(2);
  Scene s = testing::random_scene(rng, 3);
  s.presence[1] = std::vector<std::uint8_t>(20, 0);
  s.presence[1][7] = 1;
  s.presence[2] = std::vector<std::uint8_t>(20, 0);
  s.presence[2][2] = s.presence[2][6] = 1;
  CHECK(default_candidates(s) == std::vector<std::uint8_t>{0, 0, 1});
}

TEST_CASE("validate rejects broken invariants") {
  std::mt19937_64 rng(4);
  Scene s = testing::random_scene(rng, 3);
  CHECK_NOTHROW(validate(s));
  Scene a = s;
  a.presence[0][15] = 0;
  CHECK_THROWS_AS(validate(a), Error);
  Scene b = s;
  b.positions[1].pop_back();
  CHECK_THROWS_AS(validate(b), Error);
  Scene c = s;
  c.target_index = 7;
  CHECK_THROWS_AS(validate(c), Error);
}
