#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pns {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }

double l2(Point a, Point b);
double l1(Point a, Point b);

// A position sample on the scene's discrete time grid.
struct TimedPosition {
  int step = 0;
  Point p;
};

struct AgentTrack {
  int id = 0;
  std::vector<TimedPosition> samples;
};

// Agents on a shared grid of t_h + t_f steps. Internally step 0 is the oldest
// observation, step t_h - 1 the most recent one, and steps t_h .. t_h + t_f - 1
// the future horizon. Positions at absent steps hold 0 and are never read.
struct Scene {
  std::vector<int> agent_ids;
  std::vector<std::vector<Point>> positions;
  std::vector<std::vector<std::uint8_t>> presence;
  int target_index = 0;
  int t_h = 0;
  int t_f = 0;
  double dt = 0.4;

  int num_agents() const { return static_cast<int>(agent_ids.size()); }
  int num_steps() const { return t_h + t_f; }
  bool present(int agent, int step) const { return presence[agent][step] != 0; }
  const Point& at(int agent, int step) const { return positions[agent][step]; }
  int last_observed() const { return t_h - 1; }

  // Number of present steps inside the observation window.
  int observed_count(int agent) const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

// Throws EmptyGrid when t_h or t_f is 0 and MissingTarget when the target track
// does not cover every grid step. Samples outside the grid are dropped.
Scene build_scene(const std::vector<AgentTrack>& tracks, int target_id, int t_h,
                  int t_f, double dt = 0.4);

// Checks every Scene invariant; throws pns::Error describing the first
// violation.
void validate(const Scene& scene);

struct NormalizationRecord {
  Point offset;
};

struct NormalizedScene {
  Scene scene;
  NormalizationRecord record;
};

// Translates so the successor's last observed position is the origin.
NormalizedScene normalize(const Scene& scene);
Scene denormalize(const Scene& scene, const NormalizationRecord& record);

inline constexpr int kFeatureDim = 4;

// Per-agent, per-observed-step input features (x, y, dx, dy) flattened as
// [agent][step][feature]. Absent steps produce zeros; the displacement is zero
// whenever the previous step is absent.
std::vector<double> observation_features(const Scene& scene);

// Neighbors present for at least two observed steps. The successor is never a
// candidate.
std::vector<std::uint8_t> default_candidates(const Scene& scene);

// Line-oriented record: a header line followed by one line per agent.
std::string to_text(const Scene& scene);
Scene scene_from_text(const std::string& text);

nlohmann::json to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& doc);

}  // namespace pns
