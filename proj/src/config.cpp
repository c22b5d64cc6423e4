#include "pns/config.hpp"

#include <cstdio>
#include <sstream>

#include "pns/errors.hpp"

namespace pns {

void ModelConfig::validate() const {
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (modes < 1) throw ConfigError("modes must be >= 1");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (lambda < 0) throw ConfigError("lambda must be >= 0");
  if (soft_target_tau <= 0) throw ConfigError("soft_target_tau must be positive");
  if (scale_eps <= 0) throw ConfigError("scale_eps must be positive");
  if (input_scale <= 0) throw ConfigError("input_scale must be positive");
  if (t_h < 2 || t_f < 1) throw ConfigError("need t_h >= 2 and t_f >= 1");
  if (filter && (filter->d_max < 0 || filter->fov_deg < 0)) {
    throw ConfigError("filter thresholds must be non-negative");
  }
}

ModelConfig ModelConfig::eth_ucy() { return {}; }

ModelConfig ModelConfig::nuscenes() {
  ModelConfig c;
  c.t_h = 4;
  c.t_f = 12;
  c.modes = 10;
  return c;
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j = {{"hidden", hidden},
                      {"modes", modes},
                      {"top_k", top_k},
                      {"pt_enabled", pt_enabled},
                      {"attention_axis", to_string(attention_axis)},
                      {"lambda", lambda},
                      {"metric", to_string(metric)},
                      {"pns_loss", to_string(pns_loss)},
                      {"soft_target_tau", soft_target_tau},
                      {"scale_eps", scale_eps},
                      {"input_scale", input_scale},
                      {"t_h", t_h},
                      {"t_f", t_f}};
  if (filter) {
    j["filter"] = {{"d_max", filter->d_max}, {"fov_deg", filter->fov_deg}};
  } else {
    j["filter"] = nullptr;
  }
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.hidden = j.at("hidden").get<int>();
    c.modes = j.at("modes").get<int>();
    c.top_k = j.at("top_k").get<int>();
    c.pt_enabled = j.at("pt_enabled").get<bool>();
    c.attention_axis = attention_axis_from_string(j.at("attention_axis").get<std::string>());
    c.lambda = j.at("lambda").get<double>();
    c.metric = distance_metric_from_string(j.at("metric").get<std::string>());
    c.pns_loss = pns_loss_kind_from_string(j.at("pns_loss").get<std::string>());
    c.soft_target_tau = j.at("soft_target_tau").get<double>();
    c.scale_eps = j.at("scale_eps").get<double>();
    c.input_scale = j.at("input_scale").get<double>();
    c.t_h = j.at("t_h").get<int>();
    c.t_f = j.at("t_f").get<int>();
    if (j.contains("filter") && !j.at("filter").is_null()) {
      c.filter = CandidateFilter{j.at("filter").at("d_max").get<double>(),
                                 j.at("filter").at("fov_deg").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw ConfigError("betas must lie in [0, 1)");
  if (adam_eps <= 0) throw ConfigError("adam_eps must be positive");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (ema_decay < 0 || ema_decay >= 1) throw ConfigError("ema_decay must lie in [0, 1)");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (val_fraction < 0 || val_fraction >= 1) throw ConfigError("val_fraction must lie in [0, 1)");
  if (grad_clip < 0) throw ConfigError("grad_clip must be >= 0");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  for (int k : eval_k) {
    if (k < 1 || k > model.modes) throw ConfigError("eval K values must lie in [1, modes]");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"model", model.to_json()}, {"lr", lr},           {"beta1", beta1},
          {"beta2", beta2},           {"adam_eps", adam_eps}, {"lr_decay", lr_decay}, {"ema_decay", ema_decay}, {"epochs", epochs},
          {"batch_size", batch_size}, {"seed", seed},       {"patience", patience},
          {"val_fraction", val_fraction}, {"grad_clip", grad_clip}, {"threads", threads},
          {"eval_k", eval_k}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.model = ModelConfig::from_json(j.at("model"));
    c.lr = j.at("lr").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.lr_decay = j.at("lr_decay").get<double>();
    c.ema_decay = j.at("ema_decay").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.patience = j.at("patience").get<int>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.grad_clip = j.at("grad_clip").get<double>();
    c.threads = j.at("threads").get<int>();
    c.eval_k = j.at("eval_k").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "hidden") model.hidden = static_cast<int>(to_int(key, v));
  else if (key == "modes") model.modes = static_cast<int>(to_int(key, v));
  else if (key == "top_k" || key == "k") model.top_k = static_cast<int>(to_int(key, v));
  else if (key == "pt_enabled" || key == "pt") model.pt_enabled = to_bool(key, v);
  else if (key == "attention_axis") model.attention_axis = attention_axis_from_string(v);
  else if (key == "lambda") model.lambda = to_double(key, v);
  else if (key == "metric") model.metric = distance_metric_from_string(v);
  else if (key == "pns_loss") model.pns_loss = pns_loss_kind_from_string(v);
  else if (key == "filter") model.filter = to_bool(key, v) ? std::optional(model.filter.value_or(CandidateFilter{})) : std::nullopt;
  else if (key == "d_max") {
    auto f = model.filter.value_or(CandidateFilter{});
    f.d_max = to_double(key, v);
    model.filter = f;
  } else if (key == "fov") {
    auto f = model.filter.value_or(CandidateFilter{});
    f.fov_deg = to_double(key, v);
    model.filter = f;
  }
  else if (key == "soft_target_tau") model.soft_target_tau = to_double(key, v);
  else if (key == "scale_eps") model.scale_eps = to_double(key, v);
  else if (key == "input_scale") model.input_scale = to_double(key, v);
  else if (key == "t_h") model.t_h = static_cast<int>(to_int(key, v));
  else if (key == "t_f") model.t_f = static_cast<int>(to_int(key, v));
  else if (key == "lr") lr = to_double(key, v);
  else if (key == "beta1") beta1 = to_double(key, v);
  else if (key == "beta2") beta2 = to_double(key, v);
  else if (key == "adam_eps") adam_eps = to_double(key, v);
  else if (key == "lr_decay") lr_decay = to_double(key, v);
  else if (key == "ema_decay") ema_decay = to_double(key, v);
  else if (key == "epochs") epochs = static_cast<int>(to_int(key, v));
  else if (key == "batch_size") batch_size = static_cast<int>(to_int(key, v));
  else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(key, v));
  else if (key == "patience") patience = static_cast<int>(to_int(key, v));
  else if (key == "val_fraction") val_fraction = to_double(key, v);
  else if (key == "grad_clip") grad_clip = to_double(key, v);
  else if (key == "threads") threads = static_cast<int>(to_int(key, v));
  else if (key == "eval_k") {
    eval_k.clear();
    std::istringstream is(v);
    for (std::string tok; std::getline(is, tok, ',');) {
      eval_k.push_back(static_cast<int>(to_int(key, trim(tok))));
    }
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

TrainConfig TrainConfig::from_text(const std::string& text, TrainConfig base) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  base.validate();
  return base;
}

TrainConfig TrainConfig::from_text(const std::string& text) { return from_text(text, TrainConfig{}); }

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "hidden = " << model.hidden << "\n"
     << "modes = " << model.modes << "\n"
     << "top_k = " << model.top_k << "\n"
     << "pt_enabled = " << (model.pt_enabled ? "true" : "false") << "\n"
     << "attention_axis = " << to_string(model.attention_axis) << "\n"
     << "lambda = " << num(model.lambda) << "\n"
     << "metric = " << to_string(model.metric) << "\n"
     << "pns_loss = " << to_string(model.pns_loss) << "\n"
     << "filter = " << (model.filter ? "true" : "false") << "\n";
  if (model.filter) {
    os << "d_max = " << num(model.filter->d_max) << "\n"
       << "fov = " << num(model.filter->fov_deg) << "\n";
  }
  os << "soft_target_tau = " << num(model.soft_target_tau) << "\n"
     << "scale_eps = " << num(model.scale_eps) << "\n"
     << "input_scale = " << num(model.input_scale) << "\n"
     << "t_h = " << model.t_h << "\n"
     << "t_f = " << model.t_f << "\n"
     << "lr = " << num(lr) << "\n"
     << "beta1 = " << num(beta1) << "\n"
     << "beta2 = " << num(beta2) << "\n"
     << "adam_eps = " << num(adam_eps) << "\n"
     << "lr_decay = " << num(lr_decay) << "\n"
     << "ema_decay = " << num(ema_decay) << "\n"
     << "epochs = " << epochs << "\n"
     << "batch_size = " << batch_size << "\n"
     << "seed = " << seed << "\n"
     << "patience = " << patience << "\n"
     << "val_fraction = " << num(val_fraction) << "\n"
     << "grad_clip = " << num(grad_clip) << "\n"
     << "threads = " << threads << "\n"
     << "eval_k = ";
  for (std::size_t i = 0; i < eval_k.size(); ++i) os << (i ? "," : "") << eval_k[i];
  os << "\n";
  return os.str();
}

}  // namespace pns
