#include "pns/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <utility>

#include "pns/errors.hpp"

namespace pns {

std::string to_string(PathFamily family) {
  switch (family) {
    case PathFamily::kStraight: return "straight";
    case PathFamily::kArc: return "arc";
    case PathFamily::kSCurve: return "s-curve";
    case PathFamily::kBranch: return "branch";
  }
  return "unknown";
}

PathFamily path_family_from_string(const std::string& name) {
  if (name == "straight" || name == "follow") return PathFamily::kStraight;
  if (name == "arc") return PathFamily::kArc;
  if (name == "s-curve" || name == "scurve") return PathFamily::kSCurve;
  if (name == "branch") return PathFamily::kBranch;
  throw ConfigError("unknown path family '" + name + "'");
}

void SynthParams::validate() const {
  if (follow_delay < 1) throw ConfigError("follow_delay must be >= 1");
  if (noise_sigma < 0) throw ConfigError("noise_sigma must be >= 0");
  if (n_distractors < 0) throw ConfigError("n_distractors must be >= 0");
  if (t_h < 2 || t_f < 1) throw ConfigError("synthetic scenes need t_h >= 2 and t_f >= 1");
  if (dt <= 0) throw ConfigError("dt must be positive");
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Arc-length parameterized planar curve, integrated from a curvature profile
// at a fixed resolution and evaluated by linear interpolation.
class Path {
 public:
  static constexpr double kStep = 0.01;

  template <typename Curvature>
  Path(Point origin, double heading, double length, Curvature curvature) {
    const int n = static_cast<int>(std::ceil(length / kStep)) + 2;
    pts_.reserve(n);
    Point p = origin;
    double th = heading;
    pts_.push_back(p);
    for (int i = 1; i < n; ++i) {
      const double s_mid = (i - 0.5) * kStep;
      const double th_mid = th + 0.5 * kStep * curvature(s_mid);
      p = {p.x + kStep * std::cos(th_mid), p.y + kStep * std::sin(th_mid)};
      th += kStep * curvature(s_mid);
      pts_.push_back(p);
    }
  }

  Point at(double s) const {
    const double u = std::clamp(s / kStep, 0.0, static_cast<double>(pts_.size() - 1));
    const auto i = std::min(static_cast<std::size_t>(u), pts_.size() - 2);
    const double w = u - static_cast<double>(i);
    return {pts_[i].x + w * (pts_[i + 1].x - pts_[i].x),
            pts_[i].y + w * (pts_[i + 1].y - pts_[i].y)};
  }

 private:
  std::vector<Point> pts_;
};

double draw_speed(Rng& rng) { return uniform(rng, 0.8, 1.6); }

double auto_radius(const SynthParams& p, double speed) {
  return std::max(5.0 * p.follow_delay * speed * p.dt, speed * p.dt * p.t_f) + 1.0;
}

std::vector<Point> sample_track(const Path& path, double speed, double dt, int lead, int steps) {
  std::vector<Point> out(steps);
  for (int k = 0; k < steps; ++k) out[k] = path.at(speed * dt * (k + lead));
  return out;
}

double min_distance(const std::vector<Point>& a, const std::vector<std::vector<Point>>& others) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& track : others) {
    for (const auto& q : track) {
      for (const auto& p : a) best = std::min(best, l2(p, q));
    }
  }
  return best;
}

// Distractors walk straight or gently curved paths that never come within the
// exclusion radius of the reserved tracks.
std::vector<std::vector<Point>> place_distractors(Rng& rng, const SynthParams& p, double radius,
                                                  const std::vector<std::vector<Point>>& reserved) {
  const int steps = p.t_h + p.t_f;
  Point center = reserved.front()[p.t_h - 1];
  std::vector<std::vector<Point>> out;
  std::vector<std::vector<Point>> occupied = reserved;
  for (int d = 0; d < p.n_distractors; ++d) {
    std::vector<Point> track;
    for (int attempt = 0;; ++attempt) {
      const double ang = uniform(rng, -std::numbers::pi, std::numbers::pi);
      const double dist = uniform(rng, 0.0, radius + 15.0);
      const Point start{center.x + dist * std::cos(ang), center.y + dist * std::sin(ang)};
      const double heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
      const double kappa = uniform(rng, -0.1, 0.1);
      const double speed = draw_speed(rng);
      const double length = speed * p.dt * steps + 1.0;
      Path path(start, heading, length, [kappa](double) { return kappa; });
      track = sample_track(path, speed, p.dt, 0, steps);
      if (min_distance(track, reserved) >= radius) break;
      if (attempt >= 200) {
        // Push the last sample outward until it clears the reserved area.
        const double ux = std::cos(ang), uy = std::sin(ang);
        while (min_distance(track, reserved) < radius) {
          for (auto& q : track) q = {q.x + ux, q.y + uy};
        }
        break;
      }
    }
    occupied.push_back(track);
    out.push_back(std::move(track));
  }
  return out;
}

struct Assembly {
  std::vector<std::vector<Point>> tracks;
  std::vector<int> roles;  // original slot for each scene index
};

// Shuffles agent order so no index position carries meaning, and builds the
// scene. Slot 0 is always the successor.
Scene assemble(Rng& rng, const SynthParams& p, const std::vector<std::vector<Point>>& tracks,
               std::vector<int>& slot_to_index) {
  const int n = static_cast<int>(tracks.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  slot_to_index.assign(n, 0);
  std::vector<AgentTrack> agent_tracks;
  for (int idx = 0; idx < n; ++idx) {
    const int slot = order[idx];
    slot_to_index[slot] = idx;
    AgentTrack t{idx + 1, {}};
    for (int k = 0; k < p.t_h + p.t_f; ++k) t.samples.push_back({k, tracks[slot][k]});
    agent_tracks.push_back(std::move(t));
  }
  return build_scene(agent_tracks, slot_to_index[0] + 1, p.t_h, p.t_f, p.dt);
}

template <typename Curvature>
Path make_path(Rng& rng, double length, Curvature curvature) {
  const Point origin{uniform(rng, -20.0, 20.0), uniform(rng, -20.0, 20.0)};
  const double heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return Path(origin, heading, length, curvature);
}

}  // namespace

SynthScene gen_follow_scene(const SynthParams& params) {
  params.validate();
  Rng rng(params.seed);
  const int steps = params.t_h + params.t_f;
  const int delay = params.follow_delay;
  const double speed = params.speed > 0 ? params.speed : draw_speed(rng);
  const double length = speed * params.dt * (steps + delay) + 1.0;

  double kappa = 0.0, turn_at = 0.0, amp = 0.0, wavelength = 1.0, phase = 0.0;
  switch (params.path_family) {
    case PathFamily::kStraight:
      break;
    case PathFamily::kArc:
    case PathFamily::kBranch:
      kappa = uniform(rng, 0.08, 0.3) * (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
      turn_at = uniform(rng, 0.2, 0.8) * length;
      break;
    case PathFamily::kSCurve:
      amp = uniform(rng, 0.1, 0.3);
      wavelength = uniform(rng, 6.0, 14.0);
      phase = uniform(rng, 0.0, wavelength);
      break;
  }
  const PathFamily family = params.path_family;
  Path path = make_path(rng, length, [=](double s) {
    switch (family) {
      case PathFamily::kArc:
      case PathFamily::kBranch:
        return s < turn_at ? 0.0 : kappa;
      case PathFamily::kSCurve:
        return amp * std::sin(2.0 * std::numbers::pi * (s - phase) / wavelength);
      default:
        return 0.0;
    }
  });

  const auto leader = sample_track(path, speed, params.dt, delay, steps);
  // The leader at step k - delay is exactly path.at(speed * dt * k).
  auto successor = sample_track(path, speed, params.dt, 0, steps);
  if (params.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, params.noise_sigma);
    for (auto& q : successor) q = {q.x + noise(rng), q.y + noise(rng)};
  }

  const double radius =
      params.exclusion_radius >= 0 ? params.exclusion_radius : auto_radius(params, speed);
  std::vector<std::vector<Point>> tracks = {successor, leader};
  for (auto& d : place_distractors(rng, params, radius, tracks)) tracks.push_back(std::move(d));

  SynthScene out;
  std::vector<int> slot_to_index;
  out.scene = assemble(rng, params, tracks, slot_to_index);
  out.true_predecessor.assign(params.t_f, slot_to_index[1]);
  out.family = family;
  out.follow_delay = delay;
  out.leaders = {slot_to_index[1]};
  return out;
}

SynthScene gen_branch_scene(const SynthParams& params) {
  params.validate();
  if (params.path_family != PathFamily::kBranch) {
    throw ConfigError("gen_branch_scene requires the branch path family");
  }
  Rng rng(params.seed);
  const int steps = params.t_h + params.t_f;
  const int delay = params.follow_delay;
  double speed_a = params.speed > 0 ? params.speed : draw_speed(rng);
  double speed_b =
      params.equal_leader_speeds ? speed_a : (params.speed > 0 ? params.speed : draw_speed(rng));

  // The successor reaches the junction at junction_step; with enough delay the
  // followed leader has already walked two steps into its branch by then.
  const bool follow_b = uniform(rng, 0.0, 1.0) < 0.5;
  // The other leader never covers more arc than the followed one, so by mirror
  // symmetry its trace stays farther from the successor's future.
  if ((follow_b && speed_b < speed_a) || (!follow_b && speed_a < speed_b)) {
    std::swap(speed_a, speed_b);
  }
  const double follow_speed = follow_b ? speed_b : speed_a;
  const int junction_step = std::max(params.t_h - 1, params.t_h - 3 + delay);
  const double s_junction = follow_speed * params.dt * junction_step;
  const double kappa = uniform(rng, 0.2, 0.35);
  const double turn_len = (std::numbers::pi / 2) / kappa;
  const double length = std::max(speed_a, speed_b) * params.dt * (steps + delay) + 1.0;

  const Point origin{uniform(rng, -20.0, 20.0), uniform(rng, -20.0, 20.0)};
  const double heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
  auto branch_curvature = [=](double sign) {
    return [=](double s) {
      return (s < s_junction || s > s_junction + turn_len) ? 0.0 : sign * kappa;
    };
  };
  const Path branch_a(origin, heading, length, branch_curvature(1.0));
  const Path branch_b(origin, heading, length, branch_curvature(-1.0));
  const Path& followed = follow_b ? branch_b : branch_a;

  const auto leader_a = sample_track(branch_a, speed_a, params.dt, delay, steps);
  const auto leader_b = sample_track(branch_b, speed_b, params.dt, delay, steps);
  auto successor = sample_track(followed, follow_speed, params.dt, 0, steps);
  if (params.noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, params.noise_sigma);
    for (auto& q : successor) q = {q.x + noise(rng), q.y + noise(rng)};
  }

  const double radius = params.exclusion_radius >= 0
                            ? params.exclusion_radius
                            : auto_radius(params, std::max(speed_a, speed_b));
  std::vector<std::vector<Point>> tracks = {successor, leader_a, leader_b};
  for (auto& d : place_distractors(rng, params, radius, tracks)) tracks.push_back(std::move(d));

  SynthScene out;
  std::vector<int> slot_to_index;
  out.scene = assemble(rng, params, tracks, slot_to_index);
  out.true_predecessor.assign(params.t_f, slot_to_index[follow_b ? 2 : 1]);
  out.family = PathFamily::kBranch;
  out.follow_delay = delay;
  out.leaders = {slot_to_index[1], slot_to_index[2]};
  out.junction_step = junction_step;
  return out;
}

SynthScene gen_scene(const SynthParams& params) {
  return params.path_family == PathFamily::kBranch ? gen_branch_scene(params)
                                                   : gen_follow_scene(params);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<SynthScene> gen_dataset(const SynthDatasetSpec& spec) {
  if (spec.families.empty()) throw ConfigError("no path families requested");
  if (spec.min_delay < 1 || spec.max_delay < spec.min_delay) throw ConfigError("bad delay range");
  if (spec.min_distractors < 0 || spec.max_distractors < spec.min_distractors) {
    throw ConfigError("bad distractor range");
  }
  std::vector<SynthScene> out;
  out.reserve(spec.scenes);
  for (int i = 0; i < spec.scenes; ++i) {
    const std::uint64_t seed = splitmix64(spec.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(i));
    Rng rng(seed);
    SynthParams p;
    p.seed = splitmix64(seed);
    p.path_family = spec.families[i % spec.families.size()];
    p.follow_delay = std::uniform_int_distribution<int>(spec.min_delay, spec.max_delay)(rng);
    p.n_distractors =
        std::uniform_int_distribution<int>(spec.min_distractors, spec.max_distractors)(rng);
    p.noise_sigma = spec.noise_sigma;
    p.exclusion_radius = spec.exclusion_radius;
    p.t_h = spec.t_h;
    p.t_f = spec.t_f;
    p.dt = spec.dt;
    out.push_back(gen_scene(p));
  }
  return out;
}

std::vector<Scene> scenes_of(const std::vector<SynthScene>& synth) {
  std::vector<Scene> out;
  out.reserve(synth.size());
  for (const auto& s : synth) out.push_back(s.scene);
  return out;
}

nlohmann::json truth_sidecar(const std::vector<SynthScene>& synth) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : synth) {
    list.push_back({{"true_predecessor", s.true_predecessor},
                    {"family", to_string(s.family)},
                    {"follow_delay", s.follow_delay},
                    {"leaders", s.leaders},
                    {"junction_step", s.junction_step}});
  }
  return {{"format", "pns-synth-truth"}, {"version", 1}, {"scenes", std::move(list)}};
}

std::vector<std::vector<int>> truth_from_sidecar(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pns-synth-truth") throw Error("not a truth sidecar");
  std::vector<std::vector<int>> out;
  for (const auto& s : doc.at("scenes")) out.push_back(s.at("true_predecessor").get<std::vector<int>>());
  return out;
}

}  // namespace pns
