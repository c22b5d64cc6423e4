#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pns/tracing.hpp"

namespace pns {

struct ModelConfig {
  int hidden = 64;
  int modes = 20;
  int top_k = 2;
  bool pt_enabled = true;
  AttentionAxis attention_axis = AttentionAxis::kTemporal;
  double lambda = 0.5;
  DistanceMetric metric = DistanceMetric::kL2;
  PnsLossKind pns_loss = PnsLossKind::kBinary;
  std::optional<CandidateFilter> filter;
  double soft_target_tau = 1.0;  // meters
  double scale_eps = 1e-3;
  double input_scale = 0.25;     // multiplies raw metric features
  int t_h = 8;
  int t_f = 12;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);

  // Preset dimensions: ETH/UCY (8 + 12 steps, 20 modes) and the nuScenes-style
  // 2 Hz setting (4 + 12 steps, 10 modes).
  static ModelConfig eth_ucy();
  static ModelConfig nuscenes();
};

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lr_decay = 1.0;    // learning rate multiplier applied after each epoch
  double ema_decay = 0.995; // weight averaging for evaluation; 0 disables
  int epochs = 20;
  int batch_size = 8;
  std::uint64_t seed = 1;
  int patience = 5;
  double val_fraction = 0.1;
  double grad_clip = 0.0;   // global L2 norm; 0 disables
  int threads = 0;          // 0 uses the OpenMP default
  std::vector<int> eval_k = {5, 10};

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);

  // Flat "key = value" settings; '#' starts a comment. Unknown keys and
  // malformed values throw ConfigError.
  void set(const std::string& key, const std::string& value);
  static TrainConfig from_text(const std::string& text, TrainConfig base);
  static TrainConfig from_text(const std::string& text);
  std::string to_text() const;
};

}  // namespace pns
