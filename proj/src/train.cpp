#include "pns/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pns/errors.hpp"
#include "pns/kernels.hpp"
#include "pns/optim.hpp"

namespace pns {

namespace {

bool finite(const LossBundle& l) {
  return std::isfinite(l.l_pns) && std::isfinite(l.l_cls) && std::isfinite(l.l_nll) &&
         std::isfinite(l.total);
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<Scene>& scenes,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (scenes.empty()) throw ConfigError("training set is empty");
  set_threads(config.threads);

  std::mt19937_64 rng(config.seed);
  Model model(config.model, config.seed);

  std::vector<int> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  int n_val = 0;
  if (config.val_fraction > 0 && scenes.size() >= 2) {
    n_val = std::max(1, static_cast<int>(std::lround(config.val_fraction * scenes.size())));
    n_val = std::min(n_val, static_cast<int>(scenes.size()) - 1);
  }
  std::vector<Scene> val;
  for (int i = 0; i < n_val; ++i) val.push_back(scenes[order[i]]);
  std::vector<const Scene*> pool;
  for (std::size_t i = n_val; i < order.size(); ++i) pool.push_back(&scenes[order[i]]);
  const int val_k = std::min(config.eval_k.empty() ? 5 : config.eval_k.front(), config.model.modes);

  TrainResult result{model, {}, 0, false, static_cast<int>(pool.size()), n_val};
  AdamState adam(model.params());
  // Averaged weights; validation and the returned checkpoint use them.
  Model averaged = model;
  const bool use_ema = config.ema_decay > 0;
  AdamConfig adam_cfg{config.lr, config.beta1, config.beta2, config.adam_eps};
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(pool.begin(), pool.end(), rng);
    LossBundle sum;
    for (std::size_t start = 0; start < pool.size(); start += config.batch_size) {
      const std::size_t end = std::min(pool.size(), start + config.batch_size);
      const std::vector<const Scene*> batch(pool.begin() + start, pool.begin() + end);
      BatchGradient g = batch_gradient(model, batch);
      if (!finite(g.loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch starting at " << start
            << " (pns=" << g.loss.l_pns << " cls=" << g.loss.l_cls << " nll=" << g.loss.l_nll
            << ")";
        throw Divergence(msg.str());
      }
      g.grads.scale(1.0 / static_cast<double>(batch.size()));
      clip_grad_norm(g.grads, config.grad_clip);
      adam_step(model.params(), g.grads, adam, adam_cfg);
      if (use_ema) {
        for (std::size_t i = 0; i < model.params().size(); ++i) {
          auto& avg = averaged.params()[i].value;
          avg = config.ema_decay * avg + (1.0 - config.ema_decay) * model.params()[i].value;
        }
      }
      sum.l_pns += g.loss.l_pns;
      sum.l_cls += g.loss.l_cls;
      sum.l_nll += g.loss.l_nll;
      sum.total += g.loss.total;
    }
    const double n = static_cast<double>(pool.size());
    EpochLog log{epoch, {sum.l_pns / n, sum.l_nll / n, sum.l_cls / n, sum.total / n},
                 std::numeric_limits<double>::quiet_NaN()};

    const Model& current = use_ema ? averaged : model;
    bool improved = true;
    if (!val.empty()) {
      log.val_made = evaluate(current, val, {val_k}).at_k(val_k).made;
      improved = log.val_made < best;
      if (improved) best = log.val_made;
    }
    if (improved) {
      result.model = current;
      result.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    adam_cfg.lr *= config.lr_decay;
    result.curve.push_back(log);
    if (on_epoch) on_epoch(log);
    if (!val.empty() && stale >= config.patience) {
      result.early_stopped = epoch < config.epochs;
      break;
    }
  }
  return result;
}

std::string loss_curve_csv(const std::vector<EpochLog>& curve) {
  std::ostringstream os;
  os << "epoch,l_pns,l_cls,l_nll,total,val_made\n";
  char buf[256];
  for (const auto& e : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.mean.l_pns,
                  e.mean.l_cls, e.mean.l_nll, e.mean.total, e.val_made);
    os << buf;
  }
  return os.str();
}

}  // namespace pns
