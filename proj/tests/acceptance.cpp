// Acceptance run: one PASS/FAIL line per criterion; exits 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pns/grad_check.hpp"
#include "pns/kernels.hpp"
#include "pns/layers.hpp"
#include "pns/mdn.hpp"
#include "pns/metrics.hpp"
#include "pns/model.hpp"
#include "pns/synth.hpp"
#include "pns/tracing.hpp"
#include "pns/train_eval.hpp"
#include "support.hpp"

using namespace pns;
using namespace pns::nn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

Matrix rand_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Var project(Tape& tape, Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, tape.constant(rand_matrix(rng, y.rows(), y.cols()))));
}

Mask random_mask(std::mt19937_64& rng, int n, double keep = 0.7) {
  std::bernoulli_distribution b(keep);
  Mask m(static_cast<std::size_t>(n));
  for (auto& v : m) v = b(rng);
  return m;
}

// ---- gradient suite -------------------------------------------------------

// Step used by every trial; the criterion pins 1e-5, diagnostics rerun wider.
GradCheckOptions grad_options;

GradCheckResult check(const InputLossFn& fn, std::vector<Matrix> inputs) {
  return grad_check(fn, std::move(inputs), grad_options);
}

GradCheckResult check_params(ParamStore& store, const ParamLossFn& fn) {
  return grad_check_params(store, fn, grad_options);
}

struct GradTrial {
  std::string name;
  std::function<GradCheckResult(std::uint64_t)> run;
};

std::vector<GradTrial> grad_trials() {
  std::vector<GradTrial> ops;
  ops.push_back({"linear", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   return check(
                       [&](Tape& t, std::span<const Var> in) {
                         return project(t, linear(in[0], in[1], in[2]), seed);
                       },
                       {rand_matrix(rng, 3, 4), rand_matrix(rng, 4, 2), rand_matrix(rng, 1, 2)});
                 }});
  ops.push_back({"elementwise", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   return check(
                       [&](Tape& t, std::span<const Var> in) {
                         Var a = in[0], b = in[1];
                         Var y = add(mul(sigmoid(a), tanh(b)), elu_plus_one(sub(a, b), 1e-3));
                         y = add(y, scale(relu(a), 0.7));
                         y = concat_cols({y, transpose(reshape(a, 2, 3))});
                         y = concat_rows({y, slice_rows(y, 0, 1),
                                          repeat_rows(concat_cols({slice_rows(b, 1, 1), slice_rows(a, 0, 1)}), 2)});
                         y = mask_rows(gather_rows(y, {2, -1, 0, 3, 1}), {1, 1, 0, 1, 1});
                         y = add_row(y, slice_rows(y, 4, 1));
                         return project(t, matmul(y, transpose(y)), seed);
                       },
                       {rand_matrix(rng, 3, 2), rand_matrix(rng, 3, 2)});
                 }});
  ops.push_back({"mlp", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   ParamStore store;
                   const Mlp mlp = Mlp::create(store, "m", {3, 5, 2});
                   store.init_glorot(rng);
                   const Matrix x = rand_matrix(rng, 4, 3);
                   return check_params(store, [&](Tape& t) {
                     return project(t, mlp(t, store, t.constant(x)), seed);
                   });
                 }});
  ops.push_back({"gru", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   const Mask rows = random_mask(rng, 3);
                   return check(
                       [&](Tape& t, std::span<const Var> in) {
                         return project(t, gru_step(in[0], in[1], in[2], in[3], in[4], rows), seed);
                       },
                       {rand_matrix(rng, 3, 2), rand_matrix(rng, 3, 4), rand_matrix(rng, 2, 12),
                        rand_matrix(rng, 4, 12), rand_matrix(rng, 1, 12)});
                 }});
  ops.push_back({"softmax", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   Mask cols = random_mask(rng, 4);
                   cols[0] = 1;
                   Mask per_row = random_mask(rng, 12);
                   per_row[0] = per_row[4] = per_row[8] = 1;
                   return check(
                       [&](Tape& t, std::span<const Var> in) {
                         return add(project(t, softmax_rows(in[0], cols), seed),
                                    project(t, softmax_rows_masked(in[0], per_row), seed + 1));
                       },
                       {rand_matrix(rng, 3, 4, 3.0)});
                 }});
  ops.push_back({"attention", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   Mask keys = random_mask(rng, 5);
                   keys[0] = 1;
                   return check(
                       [&](Tape& t, std::span<const Var> in) {
                         return project(t, scaled_dot_attention(in[0], in[1], in[2], keys), seed);
                       },
                       {rand_matrix(rng, 3, 4), rand_matrix(rng, 5, 4), rand_matrix(rng, 5, 2)});
                 }});
  ops.push_back({"self_attention_block", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   ParamStore store;
                   const auto block = SelfAttentionBlock::create(store, "sa", 4);
                   store.init_glorot(rng);
                   const Matrix h = rand_matrix(rng, 4, 4);
                   Mask present = random_mask(rng, 4);
                   present[0] = 1;
                   return check_params(store, [&](Tape& t) {
                     return project(t, block(t, store, t.constant(h), present), seed);
                   });
                 }});
  ops.push_back({"relation_encoder", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   ParamStore store;
                   const auto rel = RelationEncoder::create(store, "rel", 4);
                   store.init_glorot(rng);
                   const Matrix h = rand_matrix(rng, 3, 4);
                   return check_params(store, [&](Tape& t) {
                     return project(t, concat_rows(rel(t, store, t.constant(h), 3)), seed);
                   });
                 }});
  ops.push_back({"influence_scorer", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   ParamStore store;
                   const auto axis = seed % 2 ? AttentionAxis::kSingle : AttentionAxis::kTemporal;
                   const auto scorer = InfluenceScorer::create(store, "inf", 4, axis);
                   store.init_glorot(rng);
                   const Matrix obs = rand_matrix(rng, 6, 4);
                   std::vector<Matrix> rel;
                   for (int t = 0; t < 3; ++t) rel.push_back(rand_matrix(rng, 4, 4));
                   return check_params(store, [&](Tape& t) {
                     std::vector<Var> vars;
                     for (const auto& m : rel) vars.push_back(t.constant(m));
                     return project(t, scorer(t, store, 0, t.constant(obs), vars), seed);
                   });
                 }});
  ops.push_back({"pns_loss", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   const Mask mask{0, 1, 1, 0, 1};
                   Matrix labels = Matrix::Zero(3, 5);
                   labels(0, 1) = labels(1, 4) = labels(2, 2) = 1;
                   const auto kind = seed % 2 ? PnsLossKind::kCategorical : PnsLossKind::kBinary;
                   return check(
                       [&](Tape& t, std::span<const Var> in) {
                         return pns_loss(predecessor_probs(in[0], mask), labels, mask, kind);
                       },
                       {rand_matrix(rng, 3, 5, 2.0)});
                 }});
  ops.push_back({"topk_aggregate", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   const Mask mask{0, 1, 1, 1};
                   const Matrix logits = rand_matrix(rng, 2, 4, 2.0);
                   const auto sel =
                       select_topk(predecessor_distribution(logits, mask).probs, mask, 2);
                   return check(
                       [&](Tape& t, std::span<const Var> in) {
                         return project(
                             t, topk_aggregate(predecessor_probs(in[0], mask), {in[1], in[2]}, sel),
                             seed);
                       },
                       {logits, rand_matrix(rng, 4, 3), rand_matrix(rng, 4, 3)});
                 }});
  ops.push_back({"mdn_decoder", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   const int d = 4, k = 2, modes = 3, t_f = 5;
                   ParamStore store;
                   const auto dec = MdnDecoder::create(store, "dec", d + k * (d + 1), d, modes);
                   store.init_glorot(rng);
                   const Matrix succ = rand_matrix(rng, t_f, d);
                   const Matrix agg = rand_matrix(rng, t_f, k * (d + 1));
                   const Matrix h0 = rand_matrix(rng, 1, d);
                   return check_params(store, [&](Tape& t) {
                     const auto mix = dec(t, store, t.constant(succ), t.constant(agg), t.constant(h0));
                     return add(add(project(t, mix.mu, seed), project(t, mix.b, seed + 1)),
                                project(t, mix.mode_probs, seed + 2));
                   });
                 }});
  ops.push_back({"laplace_nll", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   const Future y = rand_matrix(rng, 4, 2, 3.0);
                   return check(
                       [&](Tape& t, std::span<const Var> in) {
                         return laplace_nll(in[0], elu_plus_one(in[1], 1e-3), y, 1);
                       },
                       {rand_matrix(rng, 4, 6, 3.0), rand_matrix(rng, 4, 6)});
                 }});
  ops.push_back({"cls_loss", [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   const Eigen::RowVectorXd target = softmax(rand_matrix(rng, 4, 1)).transpose();
                   return check(
                       [&](Tape&, std::span<const Var> in) {
                         return cls_loss(target, softmax_rows(in[0]));
                       },
                       {rand_matrix(rng, 1, 4, 2.0)});
                 }});

  // 14 operation families x 6 trials, plus 16 end-to-end trials.
  std::vector<GradTrial> trials;
  for (const auto& op : ops) {
    for (std::uint64_t s = 0; s < 6; ++s) {
      trials.push_back({op.name, [op, s](std::uint64_t) { return op.run(s + 1); }});
    }
  }
  for (std::uint64_t s = 0; s < 16; ++s) {
    trials.push_back({"end_to_end", [s](std::uint64_t) {
                        SynthParams p;
                        p.n_distractors = 1 + static_cast<int>(s % 2);
                        p.path_family = static_cast<PathFamily>(s % 4);
                        p.seed = 100 + s;
                        const Scene scene = normalize(gen_scene(p).scene).scene;
                        ModelConfig c;
                        c.hidden = 6;
                        c.modes = 3;
                        c.pt_enabled = s % 8 != 7;
                        Model model(c, s + 1);
                        LossTargets frozen;
                        {
                          Tape t;
                          frozen = model.forward(t, scene, true).targets;
                        }
                        return check_params(model.params(), [&](Tape& t) {
                          return *model.forward(t, scene, true, &frozen).total;
                        });
                      }});
  }
  return trials;
}

void gradient_suite() {
  const auto start = Clock::now();
  const auto trials = grad_trials();
  double worst = 0.0;
  std::string where;
  int failed = 0;
  std::vector<std::size_t> failing;
  std::size_t coords = 0, nonsmooth = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto r = trials[i].run(i);
    coords += r.coords;
    nonsmooth += r.nonsmooth;
    if (!(r.max_rel_error < 1e-4)) {
      ++failed;
      failing.push_back(i);
      std::printf("  trial %zu %s: rel %.3g at %s analytic %.3g numeric %.3g\n", i,
                  trials[i].name.c_str(), r.max_rel_error, r.worst.c_str(), r.analytic, r.numeric);
    }
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      std::ostringstream os;
      os << trials[i].name << " " << r.worst << " analytic " << r.analytic << " numeric "
         << r.numeric;
      where = os.str();
    }
  }
  const double secs = seconds_since(start);

  // Failing trials again at a wider step, where cancellation noise in the
  // loss no longer dominates small gradient components.
  double wide_worst = 0.0;
  grad_options.step = 1e-3;
  for (std::size_t i : failing) wide_worst = std::max(wide_worst, trials[i].run(i).max_rel_error);
  grad_options.step = 1e-5;

  std::ostringstream os;
  os << trials.size() << " trials, " << failed << " over 1e-4, max rel error " << worst << " ("
     << where << "), " << coords << " coords, " << nonsmooth << " kink probes skipped, " << secs
     << " s";
  if (!failing.empty()) os << "; failing trials at step 1e-3: max rel error " << wide_worst;
  report(failed == 0 && trials.size() >= 100 && secs < 60.0, "gradient_suite", os.str());
}

// ---- labeling ---------------------------------------------------------------

void labeling_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> agents(1, 8);
  int mismatches = 0, steps = 0;
  for (int i = 0; i < 1000; ++i) {
    const Scene s = testing::random_scene(rng, agents(rng));
    const Mask mask = i % 2 ? default_candidates(s) : [&] {
      Mask m = random_mask(rng, s.num_agents());
      m[static_cast<std::size_t>(s.target_index)] = 0;
      return m;
    }();
    for (auto metric : {DistanceMetric::kL1, DistanceMetric::kL2}) {
      const auto got = label_predecessors(s, mask, metric).agent;
      const auto want = oracle::brute_force_labels(s, mask, metric == DistanceMetric::kL1);
      for (std::size_t t = 0; t < want.size(); ++t) {
        ++steps;
        if (got[t] != want[t]) ++mismatches;
      }
    }
  }
  const double secs = seconds_since(start);
  std::ostringstream os;
  os << "1000 scenes, N<=8, L1+L2, " << mismatches << "/" << steps << " step mismatches, " << secs
     << " s";
  report(mismatches == 0 && secs < 30.0, "labeling_oracle", os.str());
}

// ---- distribution -----------------------------------------------------------

void distribution_invariants() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> agents(2, 9), steps(1, 12), kk(1, 4);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  int cases = 0, bad_sum = 0, bad_topk = 0, bad_shift = 0;
  double worst_sum = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = agents(rng), tf = steps(rng), k = kk(rng);
    Mask mask = random_mask(rng, n, 0.6);
    mask[0] = 0;  // successor
    const Matrix logits = rand_matrix(rng, tf, n, 4.0);
    const auto dist = predecessor_distribution(logits, mask);
    const bool any = std::any_of(mask.begin(), mask.end(), [](auto v) { return v != 0; });
    ++cases;
    for (int t = 0; t < tf; ++t) {
      const double total = dist.probs.row(t).sum();
      if (any) {
        worst_sum = std::max(worst_sum, std::abs(total - 1.0));
        if (std::abs(total - 1.0) > 1e-6) ++bad_sum;
      } else if (total != 0.0 || !dist.rollback) {
        ++bad_sum;
      }
    }
    const auto sel = select_topk(dist.probs, mask, k);
    const auto shifted_logits = (logits.array() + shift(rng)).matrix();
    const auto shifted = predecessor_distribution(shifted_logits, mask);
    const auto sel_shift = select_topk(shifted.probs, mask, k);
    for (int t = 0; t < tf; ++t) {
      if (sel[t] != oracle::sort_topk(dist.probs.row(t), mask, k)) ++bad_topk;
      if (sel_shift[t] != sel[t]) ++bad_shift;
      if (argmax_candidate(shifted.probs, t, mask) != argmax_candidate(dist.probs, t, mask)) {
        ++bad_shift;
      }
    }
  }
  std::ostringstream os;
  os << cases << " cases, max |row sum - 1| " << worst_sum << ", " << bad_sum << " bad rows, "
     << bad_topk << " top-K oracle mismatches, " << bad_shift << " shift violations";
  report(cases >= 1000 && bad_sum == 0 && bad_topk == 0 && bad_shift == 0,
         "distribution_invariants", os.str());
}

// ---- analytic losses --------------------------------------------------------

void analytic_losses() {
  Tape t;
  const double nll =
      laplace_nll(t.constant(Matrix::Zero(1, 2)), t.constant(Matrix::Ones(1, 2)), Future::Zero(1, 2), 0)
          .scalar();
  const double nll_err = std::abs(nll - 2.0 * std::log(2.0));

  const Mask mask{0, 1, 1, 1};
  Matrix perfect = Matrix::Zero(3, 4);
  perfect(0, 1) = perfect(1, 3) = perfect(2, 2) = 1.0;
  double pns_err = 0.0;
  for (auto kind : {PnsLossKind::kBinary, PnsLossKind::kCategorical}) {
    pns_err = std::max(pns_err, std::abs(pns_loss(t.constant(perfect), perfect, mask, kind).scalar()));
  }

  Eigen::RowVectorXd onehot = Eigen::RowVectorXd::Zero(5);
  onehot(2) = 1.0;
  const double cls = cls_loss(onehot, t.constant(Matrix::Constant(1, 5, 0.2))).scalar();
  const double cls_err = std::abs(cls - std::log(5.0));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  double total_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng), lambda = u(rng) / 10.0;
    const double want = lambda * a + b + c;
    total_err = std::max(total_err, std::abs(total_loss(a, b, c, lambda).total - want));
    Tape tt;
    const double v = total_loss(tt.constant(Matrix::Constant(1, 1, a)), tt.constant(Matrix::Constant(1, 1, b)),
                                tt.constant(Matrix::Constant(1, 1, c)), lambda)
                         .scalar();
    total_err = std::max(total_err, std::abs(v - want));
  }
  std::ostringstream os;
  os << "laplace_nll err " << nll_err << ", pns_loss(perfect) " << pns_err << ", cls_loss err "
     << cls_err << ", total err " << total_err;
  report(nll_err <= 1e-9 && pns_err <= 1e-12 && cls_err <= 1e-9 && total_err == 0.0,
         "analytic_losses", os.str());
}

// ---- metrics ----------------------------------------------------------------

bool monotone_in_k(const EvalReport& r) {
  return r.at_k(10).made <= r.at_k(5).made && r.at_k(10).mfde <= r.at_k(5).mfde;
}

int nonmonotone_evals = 0;
int evals_seen = 0;

EvalReport tracked(EvalReport r) {
  ++evals_seen;
  if (!monotone_in_k(r)) ++nonmonotone_evals;
  return r;
}

void metric_correctness() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> modes_d(10, 20);
  double worst = 0.0;
  int bad_order = 0;
  for (int i = 0; i < 1000; ++i) {
    const Scene s = testing::random_scene(rng, 2);
    const int m = modes_d(rng);
    Prediction p;
    p.mode_probs.resize(m);
    std::vector<double> probs;
    for (int j = 0; j < m; ++j) {
      Trajectory traj;
      for (int t = 0; t < s.t_f; ++t) traj.push_back({n01(rng) * 4, n01(rng) * 4});
      p.modes.push_back(traj);
      // Coarse values produce probability ties.
      p.mode_probs(j) = 1.0 + std::round(std::abs(n01(rng)) * 3);
    }
    p.mode_probs /= p.mode_probs.sum();
    for (int j = 0; j < m; ++j) probs.push_back(p.mode_probs(j));
    const auto r = evaluate_predictions({p}, {s}, {5, 10});
    if (!monotone_in_k(r)) ++bad_order;
    for (int k : {5, 10}) {
      const auto want = oracle::brute_force_min_errors(p.modes, probs, future_of(s), k);
      worst = std::max(worst, std::abs(r.at_k(k).made - want.ade));
      worst = std::max(worst, std::abs(r.at_k(k).mfde - want.fde));
    }
  }
  std::ostringstream os;
  os << "1000 prediction sets, max |lib - brute force| " << worst << ", " << bad_order
     << " with mADE_10 > mADE_5; trained-model evaluations " << evals_seen << " with "
     << nonmonotone_evals << " violations";
  report(worst <= 1e-12 && bad_order == 0 && nonmonotone_evals == 0 && evals_seen > 0,
         "metric_correctness", os.str());
}

// ---- training studies -------------------------------------------------------

struct Split {
  std::vector<Scene> train, test;
  std::vector<std::vector<int>> test_truth;
};

Split acceptance_split() {
  SynthDatasetSpec spec;
  spec.scenes = 2000;
  spec.seed = 2026;
  const auto synth = gen_dataset(spec);
  Split s;
  for (std::size_t i = 0; i < synth.size(); ++i) {
    if (i < 400) {
      s.test.push_back(synth[i].scene);
      s.test_truth.push_back(synth[i].true_predecessor);
    } else {
      s.train.push_back(synth[i].scene);
    }
  }
  return s;
}

TrainConfig study_config(std::uint64_t seed) {
  TrainConfig c;
  c.model.hidden = 32;
  c.epochs = 30;
  c.seed = seed;
  return c;
}

double mean_made5(const std::vector<EvalReport>& rs) {
  double s = 0.0;
  for (const auto& r : rs) s += r.at_k(5).made;
  return s / static_cast<double>(rs.size());
}

double mean_of(const std::vector<EvalReport>& rs, int k, bool fde) {
  double s = 0.0;
  for (const auto& r : rs) s += fde ? r.at_k(k).mfde : r.at_k(k).made;
  return s / static_cast<double>(rs.size());
}

void training_studies(const Split& split) {
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<EvalReport> on, off, filtered;
  std::vector<double> accuracy;

  const auto ablation_start = Clock::now();
  for (auto seed : seeds) {
    auto c = study_config(seed);
    const auto t0 = Clock::now();
    auto r = train(c, split.train);
    on.push_back(tracked(evaluate(r.model, split.test, {5, 10}, &split.test_truth)));
    accuracy.push_back(*on.back().truth_accuracy);
    std::printf("  pt=on  seed %llu: mADE_5 %.4f mADE_10 %.4f planted acc %.4f epochs %zu (%.1f s)\n",
                static_cast<unsigned long long>(seed), on.back().at_k(5).made,
                on.back().at_k(10).made, accuracy.back(), r.curve.size(), seconds_since(t0));
    c.model.pt_enabled = false;
    const auto t1 = Clock::now();
    auto r_off = train(c, split.train);
    off.push_back(tracked(evaluate(r_off.model, split.test, {5, 10})));
    std::printf("  pt=off seed %llu: mADE_5 %.4f mADE_10 %.4f epochs %zu (%.1f s)\n",
                static_cast<unsigned long long>(seed), off.back().at_k(5).made,
                off.back().at_k(10).made, r_off.curve.size(), seconds_since(t1));
    std::fflush(stdout);
  }
  const double ablation_secs = seconds_since(ablation_start);
  {
    const double a = mean_made5(on), b = mean_made5(off);
    const double gain = (b - a) / b;
    std::ostringstream os;
    os << "mADE_5 pt=on " << a << " vs pt=off " << b << " (" << 100.0 * gain
       << "% lower; need >= 5%), mADE_10 " << mean_of(on, 10, false) << " vs "
       << mean_of(off, 10, false) << ", " << ablation_secs << " s for 6 runs";
    report(gain >= 0.05 && ablation_secs <= 900.0, "directional_ablation", os.str());
  }

  {
    // Labeler against planted predecessors on the same noise-free split.
    int steps = 0, match = 0;
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      const auto labels =
          label_predecessors(split.test[i], default_candidates(split.test[i]), DistanceMetric::kL2);
      for (std::size_t t = 0; t < split.test_truth[i].size(); ++t) {
        if (split.test_truth[i][t] < 0) continue;
        ++steps;
        if (labels.agent[t] == split.test_truth[i][t]) ++match;
      }
    }
    const double labeler = static_cast<double>(match) / steps;
    const double worst = *std::min_element(accuracy.begin(), accuracy.end());
    std::ostringstream os;
    os << "trained argmax vs planted " << accuracy[0] << "/" << accuracy[1] << "/" << accuracy[2]
       << " (min " << worst << ", need >= 0.8), labeler " << match << "/" << steps;
    report(worst >= 0.8 && match == steps, "predecessor_accuracy", os.str());
  }

  for (auto seed : seeds) {
    auto c = study_config(seed);
    c.model.filter = CandidateFilter{20.0, 90.0};
    const auto t0 = Clock::now();
    auto r = train(c, split.train);
    filtered.push_back(tracked(evaluate(r.model, split.test, {5, 10})));
    std::printf("  filter seed %llu: mADE_5 %.4f mADE_10 %.4f empty rate %.4f (%.1f s)\n",
                static_cast<unsigned long long>(seed), filtered.back().at_k(5).made,
                filtered.back().at_k(10).made, filtered.back().empty_rate, seconds_since(t0));
    std::fflush(stdout);
  }
  {
    const double base = mean_made5(on), with = mean_made5(filtered);
    const double change = std::abs(with - base) / base;

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> dmax(0.0, 30.0), fov(0.0, 180.0);
    std::uniform_int_distribution<int> agents(2, 8);
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
      const Scene s = testing::random_scene(rng, agents(rng));
      CandidateFilter small{dmax(rng), fov(rng)};
      CandidateFilter large{small.d_max + dmax(rng), std::min(180.0, small.fov_deg + fov(rng))};
      const Mask a = candidate_filter(s, small), b = candidate_filter(s, large);
      const Mask base_mask = default_candidates(s);
      for (std::size_t j = 0; j < a.size(); ++j) {
        if ((a[j] && !b[j]) || (b[j] && !base_mask[j])) ++violations;
      }
    }
    std::ostringstream os;
    os << "mADE_5 filter=off " << base << " vs on " << with << " (" << 100.0 * change
       << "% change; need < 3%), monotonicity violations " << violations << "/1000 scenes";
    report(change < 0.03 && violations == 0, "threshold_filter", os.str());
  }
}

// ---- determinism ------------------------------------------------------------

void determinism(const Split& split) {
  std::vector<Scene> subset(split.train.begin(), split.train.begin() + 300);
  auto c = study_config(5);
  c.epochs = 3;
  auto a = train(c, subset);
  auto b = train(c, subset);
  const auto ra = tracked(evaluate(a.model, split.test, {5, 10}));
  const auto rb = tracked(evaluate(b.model, split.test, {5, 10}));
  set_threads(4);
  auto p = train(c, subset);
  const auto rp = tracked(evaluate(p.model, split.test, {5, 10}));
  set_threads(0);
  const bool curves = loss_curve_csv(a.curve) == loss_curve_csv(b.curve) &&
                      loss_curve_csv(a.curve) == loss_curve_csv(p.curve);
  const bool weights = a.model.checkpoint() == b.model.checkpoint() &&
                       a.model.checkpoint() == p.model.checkpoint();
  const bool reports = ra.to_json().dump() == rb.to_json().dump() &&
                       ra.to_json().dump() == rp.to_json().dump() && ra.to_text() == rb.to_text();
  std::ostringstream os;
  os << "loss curves " << (curves ? "identical" : "differ") << ", checkpoints "
     << (weights ? "identical" : "differ") << ", reports " << (reports ? "identical" : "differ")
     << " (two runs plus a 4-thread run)";
  report(curves && weights && reports, "determinism", os.str());
}

}  // namespace

int main() {
  const auto start = Clock::now();
  gradient_suite();
  labeling_oracle();
  distribution_invariants();
  analytic_losses();
  const Split split = acceptance_split();
  training_studies(split);
  determinism(split);
  metric_correctness();
  std::printf("%d criteria failed, %.1f s total\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
