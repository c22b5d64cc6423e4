// pns: data generation, labeling, training, evaluation, ablation and plotting.
//
// Exit codes: 0 ok, 1 I/O, 2 usage or configuration, 3 numeric failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pns/ablation.hpp"
#include "pns/config.hpp"
#include "pns/data_io.hpp"
#include "pns/errors.hpp"
#include "pns/kernels.hpp"
#include "pns/label_table.hpp"
#include "pns/model.hpp"
#include "pns/plot.hpp"
#include "pns/synth.hpp"
#include "pns/train_eval.hpp"

#ifndef PNS_VERSION
#define PNS_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

fs::path resolve(const fs::path& workdir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : workdir / path;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw pns::IoError("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 64-bit FNV-1a of the file bytes, as hex.
std::string fingerprint(const fs::path& p) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : read_file(p)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void emit(const std::string& text, const std::optional<fs::path>& out) {
  if (out) {
    ensure_parent(*out);
    pns::write_text(*out, text);
  } else {
    std::cout << text;
  }
}

// Where the sidecar of an archive lives: foo.json -> foo.truth.json.
fs::path sidecar_path(const fs::path& archive) {
  fs::path p = archive;
  p.replace_extension(".truth.json");
  return p;
}

// Layered configuration: defaults, then the file, then --set pairs, then the
// dedicated flags (applied by the caller).
struct ConfigSource {
  std::string file;
  std::vector<std::string> sets;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", file, "flat key = value config file (keys as in config.txt)");
    cmd->add_option("--set", sets, "override one key, KEY=VALUE; repeatable, applied after --config");
  }

  pns::TrainConfig load(const fs::path& workdir) const {
    pns::TrainConfig c;
    if (!file.empty()) c = pns::TrainConfig::from_text(read_file(resolve(workdir, file)));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw pns::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
  }
};

// Dedicated flags shared by train and ablate. Unset flags leave the layered
// configuration alone.
struct TrainFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs, batch_size, hidden, modes, top_k, threads;
  std::optional<double> lr, lambda;
  std::optional<std::string> metric, pt;

  void add(CLI::App* cmd) {
    const pns::TrainConfig d;
    auto def = [](auto v) { std::ostringstream os; os << v; return " (default " + os.str() + ")"; };
    cmd->add_option("--seed", seed, "random seed" + def(d.seed));
    cmd->add_option("--epochs", epochs, "training epochs" + def(d.epochs));
    cmd->add_option("--batch-size", batch_size, "scenes per minibatch" + def(d.batch_size));
    cmd->add_option("--lr", lr, "Adam learning rate" + def(d.lr));
    cmd->add_option("--hidden", hidden, "hidden width" + def(d.model.hidden));
    cmd->add_option("--modes", modes, "mixture modes M" + def(d.model.modes));
    cmd->add_option("--k", top_k, "top predecessors aggregated" + def(d.model.top_k));
    cmd->add_option("--lambda", lambda, "weight of the predecessor loss" + def(d.model.lambda));
    cmd->add_option("--metric", metric, "labeling distance, l1 or l2 (default l2)")
        ->check(CLI::IsMember({"l1", "l2"}));
    cmd->add_option("--pt", pt, "predecessor tracing on or off (default on)")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--threads", threads, "OpenMP threads, 0 for the runtime default" + def(d.threads));
  }

  void apply(pns::TrainConfig& c) const {
    if (seed) c.seed = *seed;
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (lr) c.lr = *lr;
    if (hidden) c.model.hidden = *hidden;
    if (modes) c.model.modes = *modes;
    if (top_k) c.model.top_k = *top_k;
    if (lambda) c.model.lambda = *lambda;
    if (metric) c.model.metric = pns::distance_metric_from_string(*metric);
    if (pt) c.model.pt_enabled = *pt == "on";
    if (threads) c.threads = *threads;
  }
};

// ---- subcommands ---------------------------------------------------------

struct GenDataArgs {
  int scenes = 100;
  std::uint64_t seed = 0;
  std::string family = "all";
  double noise = 0.0;
  int distractors = -1;
  int t_h = 8;
  int t_f = 12;
  std::string out = "scenes.json";
};

int cmd_gen_data(const fs::path& workdir, const GenDataArgs& a) {
  pns::SynthDatasetSpec spec;
  spec.scenes = a.scenes;
  spec.seed = a.seed;
  spec.noise_sigma = a.noise;
  spec.t_h = a.t_h;
  spec.t_f = a.t_f;
  if (a.family == "follow") {
    spec.families = {pns::PathFamily::kStraight, pns::PathFamily::kArc, pns::PathFamily::kSCurve};
  } else if (a.family != "all") {
    spec.families = {pns::path_family_from_string(a.family)};
  }
  if (a.distractors >= 0) spec.min_distractors = spec.max_distractors = a.distractors;
  if (a.scenes < 1) throw pns::ConfigError("--scenes must be >= 1");
  const auto synth = pns::gen_dataset(spec);
  const fs::path out = resolve(workdir, a.out);
  ensure_parent(out);
  pns::write_scene_archive(out, pns::scenes_of(synth));
  pns::write_json(sidecar_path(out), pns::truth_sidecar(synth));
  std::cout << "wrote " << synth.size() << " scenes to " << out.string() << " and truth to "
            << sidecar_path(out).string() << "\n";
  return 0;
}

struct LabelArgs {
  std::string in = "scenes.json";
  std::string metric = "l2";
  std::optional<double> dmax, fov;
  std::string truth;
  std::string out;
  std::string format = "text";
};

int cmd_label(const fs::path& workdir, const LabelArgs& a) {
  const fs::path in = resolve(workdir, a.in);
  const auto scenes = pns::read_scene_archive(in);
  std::optional<pns::CandidateFilter> filter;
  if (a.dmax || a.fov) {
    pns::CandidateFilter f;
    if (a.dmax) f.d_max = *a.dmax;
    if (a.fov) f.fov_deg = *a.fov;
    if (f.d_max <= 0 || f.fov_deg <= 0 || f.fov_deg > 180) {
      throw pns::ConfigError("--dmax must be > 0 and --fov in (0, 180]");
    }
    filter = f;
  }
  std::optional<std::vector<std::vector<int>>> truth;
  if (!a.truth.empty()) truth = pns::truth_from_sidecar(pns::read_json(resolve(workdir, a.truth)));
  const auto table = pns::label_table(scenes, pns::distance_metric_from_string(a.metric), filter,
                                      truth ? &*truth : nullptr);
  std::optional<fs::path> out;
  if (!a.out.empty()) out = resolve(workdir, a.out);
  emit(a.format == "json" ? table.to_json().dump(2) + "\n" : table.to_text(), out);
  std::cerr << "candidates " << table.total_candidates << " filtered " << table.total_filtered;
  if (table.truth_match) std::cerr << " truth_match " << *table.truth_match;
  std::cerr << "\n";
  return 0;
}

struct TrainArgs {
  ConfigSource source;
  TrainFlags flags;
  std::string data = "scenes.json";
  std::string out_dir = "run";
};

int cmd_train(const fs::path& workdir, const TrainArgs& a) {
  pns::TrainConfig c = a.source.load(workdir);
  a.flags.apply(c);
  c.validate();
  pns::set_threads(c.threads);
  const fs::path data = resolve(workdir, a.data);
  const auto scenes = pns::read_scene_archive(data);
  const fs::path dir = resolve(workdir, a.out_dir);
  fs::create_directories(dir);

  const json manifest = {
      {"tool", "pns"},
      {"version", PNS_VERSION},
      {"seed", c.seed},
      {"config", c.to_json()},
      {"config_text", c.to_text()},
      {"data", {{"path", data.string()}, {"fingerprint", fingerprint(data)},
                {"scenes", scenes.size()}}},
      {"artifacts",
       {{"checkpoint", (dir / "checkpoint.json").string()},
        {"loss_curve", (dir / "loss_curve.csv").string()},
        {"config", (dir / "config.txt").string()}}}};
  pns::write_json(dir / "manifest.json", manifest);
  pns::write_text(dir / "config.txt", c.to_text());

  const auto result = pns::train(c, scenes, [](const pns::EpochLog& e) {
    std::fprintf(stderr, "epoch %3d  total %.5f  pns %.5f  cls %.5f  nll %.5f  val_mADE %.4f\n",
                 e.epoch, e.mean.total, e.mean.l_pns, e.mean.l_cls, e.mean.l_nll, e.val_made);
  });
  pns::write_json(dir / "checkpoint.json", result.model.checkpoint());
  pns::write_text(dir / "loss_curve.csv", pns::loss_curve_csv(result.curve));
  std::cout << "best epoch " << result.best_epoch << (result.early_stopped ? " (early stop)" : "")
            << ", checkpoint " << (dir / "checkpoint.json").string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint = "run/checkpoint.json";
  std::string data = "scenes.json";
  std::vector<int> ks = {5, 10};
  std::string truth;
  std::string format = "text";
  std::string out;
  std::string predictions;
  int threads = 0;
};

int cmd_eval(const fs::path& workdir, const EvalArgs& a) {
  pns::set_threads(a.threads);
  const auto model = pns::Model::from_checkpoint(pns::read_json(resolve(workdir, a.checkpoint)));
  const auto scenes = pns::read_scene_archive(resolve(workdir, a.data));
  std::optional<std::vector<std::vector<int>>> truth;
  if (!a.truth.empty()) truth = pns::truth_from_sidecar(pns::read_json(resolve(workdir, a.truth)));
  for (int k : a.ks) {
    if (k < 1 || k > model.config().modes) {
      throw pns::KExceedsM("--k " + std::to_string(k) + " outside 1.." +
                           std::to_string(model.config().modes));
    }
  }
  const auto report = pns::evaluate(model, scenes, a.ks, truth ? &*truth : nullptr);
  if (!a.predictions.empty()) {
    const fs::path p = resolve(workdir, a.predictions);
    ensure_parent(p);
    pns::write_json(p, pns::predictions_document(pns::predict_batch(model, scenes)));
  }
  std::optional<fs::path> out;
  if (!a.out.empty()) out = resolve(workdir, a.out);
  emit(a.format == "json" ? report.to_json().dump(2) + "\n" : report.to_text(), out);
  return 0;
}

struct AblateArgs {
  ConfigSource source;
  TrainFlags flags;
  std::string data = "scenes.json";
  std::string test;
  double test_fraction = 0.25;
  std::vector<std::string> axes = {"pt"};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string format = "text";
  std::string out;
};

int cmd_ablate(const fs::path& workdir, const AblateArgs& a) {
  pns::TrainConfig c = a.source.load(workdir);
  a.flags.apply(c);
  c.validate();
  pns::set_threads(c.threads);
  auto scenes = pns::read_scene_archive(resolve(workdir, a.data));
  std::vector<pns::Scene> train_set, test_set;
  if (!a.test.empty()) {
    train_set = std::move(scenes);
    test_set = pns::read_scene_archive(resolve(workdir, a.test));
  } else {
    if (a.test_fraction <= 0 || a.test_fraction >= 1) {
      throw pns::ConfigError("--test-fraction must lie in (0, 1)");
    }
    // Leading scenes form the held-out split.
    const auto n_test = static_cast<std::size_t>(a.test_fraction * static_cast<double>(scenes.size()));
    if (n_test == 0 || n_test >= scenes.size()) throw pns::ConfigError("too few scenes to split");
    test_set.assign(scenes.begin(), scenes.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_set.assign(scenes.begin() + static_cast<std::ptrdiff_t>(n_test), scenes.end());
  }
  // Reject bad axes before any training.
  (void)pns::ablation_variants(c, a.axes);
  const auto table = pns::ablation_run(
      c, a.axes, train_set, test_set, a.seeds,
      [&](const pns::AblationVariant& v, std::uint64_t seed, const pns::EvalReport& r) {
        std::fprintf(stderr, "%s=%s seed %llu  mADE_%d %.4f\n", v.axis.c_str(), v.value.c_str(),
                     static_cast<unsigned long long>(seed), r.by_k.front().k, r.by_k.front().made);
      });
  std::optional<fs::path> out;
  if (!a.out.empty()) out = resolve(workdir, a.out);
  emit(a.format == "json" ? table.to_json().dump(2) + "\n" : table.to_text(), out);
  return 0;
}

struct PlotArgs {
  std::string data = "scenes.json";
  int scene = 0;
  std::string checkpoint;
  std::string metric = "l2";
  std::string out = "scene.svg";
};

int cmd_plot(const fs::path& workdir, const PlotArgs& a) {
  const auto scenes = pns::read_scene_archive(resolve(workdir, a.data));
  if (a.scene < 0 || a.scene >= static_cast<int>(scenes.size())) {
    throw pns::ConfigError("--scene " + std::to_string(a.scene) + " outside 0.." +
                           std::to_string(scenes.size() - 1));
  }
  const pns::Scene& s = scenes[static_cast<std::size_t>(a.scene)];
  std::optional<pns::Prediction> pred;
  pns::nn::Mask candidates = pns::default_candidates(s);
  if (!a.checkpoint.empty()) {
    const auto model = pns::Model::from_checkpoint(pns::read_json(resolve(workdir, a.checkpoint)));
    pred = model.predict(s);
    candidates = model.candidates_for(s);
  }
  const auto labels =
      pns::label_predecessors(s, candidates, pns::distance_metric_from_string(a.metric));
  const fs::path out = resolve(workdir, a.out);
  ensure_parent(out);
  pns::write_text(out, pns::plot_scene(s, pred ? &*pred : nullptr, labels));
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const pns::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const pns::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const pns::Divergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const pns::AllMasked& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const pns::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed document: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predecessor tracing trajectory prediction toolkit"};
  app.set_version_flag("--version", std::string(PNS_VERSION));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::string workdir;
  auto add_workdir = [&](CLI::App* cmd) {
    cmd->add_option("--workdir", workdir, "directory all relative paths resolve against")
        ->required();
  };

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "generate a synthetic scene archive and truth sidecar");
  add_workdir(c_gen);
  c_gen->add_option("--scenes", gen.scenes, "number of scenes");
  c_gen->add_option("--seed", gen.seed, "generator seed");
  c_gen->add_option("--family", gen.family, "straight, arc, s-curve, branch, follow (the three non-branch families) or all; cycled per scene");
  c_gen->add_option("--noise", gen.noise, "Gaussian noise sigma on the successor, meters");
  c_gen->add_option("--distractors", gen.distractors,
                    "distractors per scene; -1 draws 1..4 per scene");
  c_gen->add_option("--t-h", gen.t_h, "observed steps");
  c_gen->add_option("--t-f", gen.t_f, "future steps");
  c_gen->add_option("--out", gen.out, "archive path; the sidecar goes next to it as *.truth.json");

  LabelArgs lab;
  auto* c_lab = app.add_subcommand("label", "nearest-trace predecessor labels per future step");
  add_workdir(c_lab);
  c_lab->add_option("--in", lab.in, "scene archive");
  c_lab->add_option("--metric", lab.metric, "l1 or l2")->check(CLI::IsMember({"l1", "l2"}));
  c_lab->add_option("--dmax", lab.dmax, "filter radius in meters (default off; 20 when --fov is given)");
  c_lab->add_option("--fov", lab.fov, "filter half-angle in degrees (default off; 90 when --dmax is given)");
  c_lab->add_option("--truth", lab.truth, "truth sidecar to score against (default none)");
  c_lab->add_option("--out", lab.out, "output file (default stdout)");
  c_lab->add_option("--format", lab.format, "text or json")->check(CLI::IsMember({"text", "json"}));

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "train a model; writes manifest, checkpoint and loss curve");
  add_workdir(c_tr);
  tr.source.add(c_tr);
  tr.flags.add(c_tr);
  c_tr->add_option("--data", tr.data, "training scene archive");
  c_tr->add_option("--out-dir", tr.out_dir, "run directory");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_workdir(c_ev);
  c_ev->add_option("--checkpoint", ev.checkpoint, "checkpoint file");
  c_ev->add_option("--data", ev.data, "scene archive");
  c_ev->add_option("--k", ev.ks, "K values; repeatable");
  c_ev->add_option("--truth", ev.truth, "truth sidecar for planted accuracy (default none)");
  c_ev->add_option("--format", ev.format, "text or json")->check(CLI::IsMember({"text", "json"}));
  c_ev->add_option("--out", ev.out, "output file (default stdout)");
  c_ev->add_option("--predictions", ev.predictions,
                   "also write every scene's modes and probabilities here (default none)");
  c_ev->add_option("--threads", ev.threads, "OpenMP threads, 0 for the runtime default");

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "train and compare variants along study axes");
  add_workdir(c_ab);
  ab.source.add(c_ab);
  ab.flags.add(c_ab);
  c_ab->add_option("--data", ab.data, "scene archive (training split unless --test is given)");
  c_ab->add_option("--test", ab.test, "held-out archive (default: leading scenes of --data)");
  c_ab->add_option("--test-fraction", ab.test_fraction, "held-out share when --test is absent");
  c_ab->add_option("--axis", ab.axes, "pt, k, metric, lambda or filter; repeatable")
      ->check(CLI::IsMember({"pt", "k", "metric", "lambda", "filter"}));
  c_ab->add_option("--seeds", ab.seeds, "training seeds; repeatable");
  c_ab->add_option("--format", ab.format, "text or json")->check(CLI::IsMember({"text", "json"}));
  c_ab->add_option("--out", ab.out, "output file (default stdout)");

  PlotArgs pl;
  auto* c_pl = app.add_subcommand("plot", "render one scene as SVG");
  add_workdir(c_pl);
  c_pl->add_option("--data", pl.data, "scene archive");
  c_pl->add_option("--scene", pl.scene, "scene index");
  c_pl->add_option("--checkpoint", pl.checkpoint, "checkpoint for predicted modes (default none)");
  c_pl->add_option("--metric", pl.metric, "labeling metric, l1 or l2")
      ->check(CLI::IsMember({"l1", "l2"}));
  c_pl->add_option("--out", pl.out, "SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const fs::path wd(workdir);
  return guarded([&] {
    if (*c_gen) return cmd_gen_data(wd, gen);
    if (*c_lab) return cmd_label(wd, lab);
    if (*c_tr) return cmd_train(wd, tr);
    if (*c_ev) return cmd_eval(wd, ev);
    if (*c_ab) return cmd_ablate(wd, ab);
    return cmd_plot(wd, pl);
  });
}
