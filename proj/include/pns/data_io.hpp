#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "pns/scene.hpp"

namespace pns {

struct RawTrack {
  int frame = 0;
  int agent = 0;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const RawTrack&, const RawTrack&) = default;
};

// Whitespace-separated "frame agent x y" lines. Blank lines and lines starting
// with '#' are skipped. Output is sorted by (agent, frame).
std::vector<RawTrack> parse_tsv(std::istream& in);
std::vector<RawTrack> load_tsv(const std::filesystem::path& path);

// Keeps records whose frame is a multiple of keep_every * base_step.
std::vector<RawTrack> downsample(const std::vector<RawTrack>& tracks, int keep_every,
                                 int base_step = 1);

struct DatasetConfig {
  double rate_hz = 2.5;
  double obs_seconds = 3.2;
  double pred_seconds = 4.8;
  int window_stride = 1;
  // Frames between consecutive grid steps; 0 infers it from the data.
  int frame_step = 0;

  static DatasetConfig eth_ucy() { return {}; }
  static DatasetConfig nuscenes() { return {2.0, 2.0, 6.0, 1, 0}; }

  int t_h() const;
  int t_f() const;
  double dt() const { return 1.0 / rate_hz; }
  // Throws ConfigError when a horizon is not a whole number of steps.
  void validate() const;
};

// One scene per (agent, window start) where the agent covers the full window.
// Ordered by agent id, then start frame.
std::vector<Scene> sliding_windows(const std::vector<RawTrack>& tracks,
                                   const DatasetConfig& config);

struct SourceFile {
  std::string path;
  std::vector<Scene> scenes;
};

struct NamedSubset {
  std::string name;
  std::vector<SourceFile> files;
};

struct DataSplit {
  std::vector<Scene> train;
  std::vector<Scene> test;
  std::vector<std::string> train_files;
  std::vector<std::string> test_files;
};

// Test set is the held-out subset, train set is everything else. Throws
// UnknownSubset when held_out names no subset.
DataSplit leave_one_out_split(const std::vector<NamedSubset>& subsets,
                              const std::string& held_out);

NamedSubset load_subset(const std::string& name,
                        const std::vector<std::filesystem::path>& paths,
                        const DatasetConfig& config);

// Scene archive: {"format": "pns-scene-archive", "version": 1, "scenes": [...]}.
nlohmann::json scene_archive(const std::vector<Scene>& scenes);
std::vector<Scene> scenes_from_archive(const nlohmann::json& doc);
void write_scene_archive(const std::filesystem::path& path, const std::vector<Scene>& scenes);
std::vector<Scene> read_scene_archive(const std::filesystem::path& path);

// Shared helpers for the JSON documents the tools exchange.
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pns
