#include "pns/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "pns/errors.hpp"

namespace pns {

namespace {

bool parse_double(const std::string& tok, double& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_int(const std::string& tok, int& out) {
  // Some distributions store integral ids as "1.0".
  double v = 0.0;
  if (!parse_double(tok, v) || v != std::floor(v)) return false;
  out = static_cast<int>(v);
  return true;
}

}  // namespace

std::vector<RawTrack> parse_tsv(std::istream& in) {
  std::vector<RawTrack> out;
  std::string line;
  int line_no = 0;
  std::set<std::pair<int, int>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> cols;
    for (std::string tok; ls >> tok;) cols.push_back(tok);
    if (cols.empty() || cols[0][0] == '#') continue;
    if (cols.size() != 4) {
      throw ParseError("expected 4 columns, found " + std::to_string(cols.size()), line_no);
    }
    RawTrack r;
    if (!parse_int(cols[0], r.frame) || !parse_int(cols[1], r.agent)) {
      throw ParseError("frame and agent id must be integers", line_no);
    }
    if (!parse_double(cols[2], r.x) || !parse_double(cols[3], r.y)) {
      throw NonNumericCoordinate("non-numeric coordinate", line_no);
    }
    if (!seen.insert({r.frame, r.agent}).second) {
      throw ParseError("duplicate (frame, agent) pair", line_no);
    }
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const RawTrack& a, const RawTrack& b) {
    return std::tie(a.agent, a.frame) < std::tie(b.agent, b.frame);
  });
  return out;
}

std::vector<RawTrack> load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_tsv(in);
}

std::vector<RawTrack> downsample(const std::vector<RawTrack>& tracks, int keep_every,
                                 int base_step) {
  if (keep_every < 1 || base_step < 1) throw ConfigError("keep_every and base_step must be >= 1");
  const int period = keep_every * base_step;
  std::vector<RawTrack> out;
  std::copy_if(tracks.begin(), tracks.end(), std::back_inserter(out),
               [period](const RawTrack& r) { return r.frame % period == 0; });
  return out;
}

namespace {

int whole_steps(double seconds, double rate_hz, const char* what) {
  const double steps = seconds * rate_hz;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 || rounded < 1) {
    throw ConfigError(std::string(what) + " is not a positive whole number of steps");
  }
  return static_cast<int>(rounded);
}

}  // namespace

int DatasetConfig::t_h() const { return whole_steps(obs_seconds, rate_hz, "observation horizon"); }
int DatasetConfig::t_f() const { return whole_steps(pred_seconds, rate_hz, "prediction horizon"); }

void DatasetConfig::validate() const {
  if (rate_hz <= 0) throw ConfigError("rate_hz must be positive");
  if (window_stride < 1) throw ConfigError("window_stride must be >= 1");
  if (frame_step < 0) throw ConfigError("frame_step must be >= 0");
  (void)t_h();
  (void)t_f();
}

std::vector<Scene> sliding_windows(const std::vector<RawTrack>& tracks,
                                   const DatasetConfig& config) {
  config.validate();
  const int t_h = config.t_h();
  const int t_f = config.t_f();
  const int steps = t_h + t_f;
  if (tracks.empty()) return {};

  std::map<int, std::map<int, Point>> by_agent;
  for (const auto& r : tracks) by_agent[r.agent][r.frame] = {r.x, r.y};

  int step = config.frame_step;
  if (step == 0) {
    for (const auto& [id, frames] : by_agent) {
      for (auto it = frames.begin(), nx = std::next(it); nx != frames.end(); ++it, ++nx) {
        step = std::gcd(step, nx->first - it->first);
      }
    }
    if (step == 0) step = 1;
  }
  int origin = tracks.front().frame;
  for (const auto& r : tracks) origin = std::min(origin, r.frame);

  std::vector<Scene> out;
  for (const auto& [target, frames] : by_agent) {
    for (const auto& [start, _] : frames) {
      if ((start - origin) % step != 0) continue;
      if (((start - origin) / step) % config.window_stride != 0) continue;
      bool full = true;
      for (int k = 0; k < steps && full; ++k) full = frames.count(start + k * step) > 0;
      if (!full) continue;

      std::vector<AgentTrack> window;
      for (const auto& [id, other] : by_agent) {
        AgentTrack track{id, {}};
        for (int k = 0; k < steps; ++k) {
          auto it = other.find(start + k * step);
          if (it != other.end()) track.samples.push_back({k, it->second});
        }
        if (!track.samples.empty()) window.push_back(std::move(track));
      }
      out.push_back(build_scene(window, target, t_h, t_f, config.dt()));
    }
  }
  return out;
}

DataSplit leave_one_out_split(const std::vector<NamedSubset>& subsets,
                              const std::string& held_out) {
  const bool known = std::any_of(subsets.begin(), subsets.end(),
                                 [&](const NamedSubset& s) { return s.name == held_out; });
  if (!known) throw UnknownSubset("unknown subset '" + held_out + "'");
  DataSplit split;
  for (const auto& subset : subsets) {
    const bool is_test = subset.name == held_out;
    for (const auto& file : subset.files) {
      auto& dst = is_test ? split.test : split.train;
      dst.insert(dst.end(), file.scenes.begin(), file.scenes.end());
      (is_test ? split.test_files : split.train_files).push_back(file.path);
    }
  }
  return split;
}

NamedSubset load_subset(const std::string& name,
                        const std::vector<std::filesystem::path>& paths,
                        const DatasetConfig& config) {
  NamedSubset subset{name, {}};
  for (const auto& p : paths) {
    subset.files.push_back({p.string(), sliding_windows(load_tsv(p), config)});
  }
  return subset;
}

nlohmann::json scene_archive(const std::vector<Scene>& scenes) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : scenes) list.push_back(to_json(s));
  return {{"format", "pns-scene-archive"}, {"version", 1}, {"scenes", std::move(list)}};
}

std::vector<Scene> scenes_from_archive(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pns-scene-archive") throw Error("not a scene archive");
  if (doc.value("version", 0) != 1) throw Error("unsupported scene archive version");
  std::vector<Scene> scenes;
  for (const auto& s : doc.at("scenes")) scenes.push_back(scene_from_json(s));
  return scenes;
}

void write_scene_archive(const std::filesystem::path& path, const std::vector<Scene>& scenes) {
  write_json(path, scene_archive(scenes));
}

std::vector<Scene> read_scene_archive(const std::filesystem::path& path) {
  return scenes_from_archive(read_json(path));
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text(path, doc.dump(1) + "\n");
}

}  // namespace pns
