#include "pns/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pns/errors.hpp"

namespace pns {

double l2(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }
double l1(Point a, Point b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

int Scene::observed_count(int agent) const {
  int n = 0;
  for (int t = 0; t < t_h; ++t) n += presence[agent][t] != 0;
  return n;
}

Scene build_scene(const std::vector<AgentTrack>& tracks, int target_id, int t_h,
                  int t_f, double dt) {
  if (t_h <= 0 || t_f <= 0) throw EmptyGrid("t_h and t_f must both be positive");
  const int steps = t_h + t_f;
  Scene scene;
  scene.t_h = t_h;
  scene.t_f = t_f;
  scene.dt = dt;
  scene.target_index = -1;
  for (const auto& track : tracks) {
    if (std::find(scene.agent_ids.begin(), scene.agent_ids.end(), track.id) !=
        scene.agent_ids.end()) {
      throw Error("duplicate agent id " + std::to_string(track.id));
    }
    std::vector<Point> pos(steps);
    std::vector<std::uint8_t> mask(steps, 0);
    for (const auto& s : track.samples) {
      if (s.step < 0 || s.step >= steps) continue;
      pos[s.step] = s.p;
      mask[s.step] = 1;
    }
    if (track.id == target_id) scene.target_index = scene.num_agents();
    scene.agent_ids.push_back(track.id);
    scene.positions.push_back(std::move(pos));
    scene.presence.push_back(std::move(mask));
  }
  if (scene.target_index < 0) {
    throw MissingTarget("target agent " + std::to_string(target_id) + " has no track");
  }
  const auto& mask = scene.presence[scene.target_index];
  if (std::find(mask.begin(), mask.end(), 0) != mask.end()) {
    throw MissingTarget("target agent " + std::to_string(target_id) +
                        " does not cover all " + std::to_string(steps) + " steps");
  }
  return scene;
}

void validate(const Scene& scene) {
  if (scene.t_h <= 0 || scene.t_f <= 0) throw EmptyGrid("empty time grid");
  const auto n = static_cast<std::size_t>(scene.num_agents());
  if (n == 0) throw Error("scene has no agents");
  if (scene.positions.size() != n || scene.presence.size() != n) {
    throw ShapeMismatch("per-agent arrays disagree with agent count");
  }
  const auto steps = static_cast<std::size_t>(scene.num_steps());
  for (std::size_t a = 0; a < n; ++a) {
    if (scene.positions[a].size() != steps || scene.presence[a].size() != steps) {
      throw ShapeMismatch("agent " + std::to_string(a) + " is off the time grid");
    }
  }
  if (scene.target_index < 0 || scene.target_index >= scene.num_agents()) {
    throw MissingTarget("target index out of range");
  }
  for (int t = 0; t < scene.num_steps(); ++t) {
    if (!scene.present(scene.target_index, t)) {
      throw MissingTarget("successor absent at step " + std::to_string(t));
    }
  }
}

NormalizedScene normalize(const Scene& scene) {
  NormalizedScene out{scene, {scene.at(scene.target_index, scene.last_observed())}};
  for (int a = 0; a < scene.num_agents(); ++a) {
    for (int t = 0; t < scene.num_steps(); ++t) {
      if (scene.present(a, t)) out.scene.positions[a][t] = scene.at(a, t) - out.record.offset;
    }
  }
  return out;
}

Scene denormalize(const Scene& scene, const NormalizationRecord& record) {
  Scene out = scene;
  for (int a = 0; a < scene.num_agents(); ++a) {
    for (int t = 0; t < scene.num_steps(); ++t) {
      if (scene.present(a, t)) out.positions[a][t] = scene.at(a, t) + record.offset;
    }
  }
  return out;
}

std::vector<double> observation_features(const Scene& scene) {
  const int n = scene.num_agents();
  std::vector<double> f(static_cast<std::size_t>(n) * scene.t_h * kFeatureDim, 0.0);
  for (int a = 0; a < n; ++a) {
    for (int t = 0; t < scene.t_h; ++t) {
      if (!scene.present(a, t)) continue;
      double* row = &f[(static_cast<std::size_t>(a) * scene.t_h + t) * kFeatureDim];
      const Point p = scene.at(a, t);
      row[0] = p.x;
      row[1] = p.y;
      if (t > 0 && scene.present(a, t - 1)) {
        const Point d = p - scene.at(a, t - 1);
        row[2] = d.x;
        row[3] = d.y;
      }
    }
  }
  return f;
}

std::vector<std::uint8_t> default_candidates(const Scene& scene) {
  std::vector<std::uint8_t> mask(scene.num_agents(), 0);
  for (int a = 0; a < scene.num_agents(); ++a) {
    mask[a] = a != scene.target_index && scene.observed_count(a) >= 2;
  }
  return mask;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_text(const Scene& scene) {
  std::ostringstream os;
  os << "scene " << scene.t_h << ' ' << scene.t_f << ' ' << fmt_double(scene.dt) << ' '
     << scene.target_index << ' ' << scene.num_agents() << '\n';
  for (int a = 0; a < scene.num_agents(); ++a) {
    os << "agent " << scene.agent_ids[a];
    for (int t = 0; t < scene.num_steps(); ++t) {
      if (scene.present(a, t)) {
        os << ' ' << fmt_double(scene.at(a, t).x) << ',' << fmt_double(scene.at(a, t).y);
      } else {
        os << " -";
      }
    }
    os << '\n';
  }
  return os.str();
}

Scene scene_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> std::istringstream {
    if (!std::getline(is, line)) throw ParseError("unexpected end of scene record", line_no + 1);
    ++line_no;
    return std::istringstream(line);
  };
  Scene scene;
  int n = 0;
  {
    auto ls = next_line();
    std::string tag;
    if (!(ls >> tag >> scene.t_h >> scene.t_f >> scene.dt >> scene.target_index >> n) ||
        tag != "scene") {
      throw ParseError("malformed scene header", line_no);
    }
  }
  const int steps = scene.num_steps();
  for (int a = 0; a < n; ++a) {
    auto ls = next_line();
    std::string tag;
    int id = 0;
    if (!(ls >> tag >> id) || tag != "agent") throw ParseError("malformed agent line", line_no);
    std::vector<Point> pos(steps);
    std::vector<std::uint8_t> mask(steps, 0);
    for (int t = 0; t < steps; ++t) {
      std::string tok;
      if (!(ls >> tok)) throw ParseError("agent line too short", line_no);
      if (tok == "-") continue;
      const auto comma = tok.find(',');
      if (comma == std::string::npos) throw ParseError("expected x,y", line_no);
      try {
        pos[t] = {std::stod(tok.substr(0, comma)), std::stod(tok.substr(comma + 1))};
      } catch (const std::exception&) {
        throw NonNumericCoordinate("non-numeric coordinate '" + tok + "'", line_no);
      }
      mask[t] = 1;
    }
    scene.agent_ids.push_back(id);
    scene.positions.push_back(std::move(pos));
    scene.presence.push_back(std::move(mask));
  }
  validate(scene);
  return scene;
}

nlohmann::json to_json(const Scene& scene) {
  nlohmann::json positions = nlohmann::json::array();
  nlohmann::json masks = nlohmann::json::array();
  for (int a = 0; a < scene.num_agents(); ++a) {
    nlohmann::json track = nlohmann::json::array();
    nlohmann::json mask = nlohmann::json::array();
    for (int t = 0; t < scene.num_steps(); ++t) {
      track.push_back({scene.at(a, t).x, scene.at(a, t).y});
      mask.push_back(scene.presence[a][t] ? 1 : 0);
    }
    positions.push_back(std::move(track));
    masks.push_back(std::move(mask));
  }
  return {{"ids", scene.agent_ids}, {"dt", scene.dt},         {"t_h", scene.t_h},
          {"t_f", scene.t_f},       {"target", scene.target_index},
          {"positions", positions}, {"presence", masks}};
}

Scene scene_from_json(const nlohmann::json& doc) {
  Scene scene;
  try {
    scene.agent_ids = doc.at("ids").get<std::vector<int>>();
    scene.dt = doc.at("dt").get<double>();
    scene.t_h = doc.at("t_h").get<int>();
    scene.t_f = doc.at("t_f").get<int>();
    scene.target_index = doc.at("target").get<int>();
    for (const auto& track : doc.at("positions")) {
      std::vector<Point> pos;
      for (const auto& xy : track) pos.push_back({xy.at(0).get<double>(), xy.at(1).get<double>()});
      scene.positions.push_back(std::move(pos));
    }
    for (const auto& mask : doc.at("presence")) {
      scene.presence.push_back(mask.get<std::vector<std::uint8_t>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed scene document: ") + e.what());
  }
  // Padding is canonical zero regardless of what the document stored.
  for (std::size_t a = 0; a < scene.positions.size() && a < scene.presence.size(); ++a) {
    for (std::size_t t = 0; t < scene.positions[a].size() && t < scene.presence[a].size(); ++t) {
      if (!scene.presence[a][t]) scene.positions[a][t] = {};
    }
  }
  validate(scene);
  return scene;
}

}  // namespace pns
