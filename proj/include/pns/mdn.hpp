#pragma once

#include <string>
#include <vector>

#include "pns/autodiff.hpp"
#include "pns/layers.hpp"
#include "pns/scene.hpp"

namespace pns {

inline constexpr double kScaleEpsilon = 1e-3;

// Values of a decoded Laplace mixture. mu and b are t_f x 2M with columns
// [m0.x, m0.y, m1.x, m1.y, ...].
struct LaplaceMixture {
  nn::Matrix mu;
  nn::Matrix b;
  Eigen::RowVectorXd mode_probs;

  int modes() const { return static_cast<int>(mode_probs.size()); }
  int steps() const { return static_cast<int>(mu.rows()); }
  Point location(int mode, int step) const { return {mu(step, 2 * mode), mu(step, 2 * mode + 1)}; }
};

// Tape handles for the same quantities.
struct MixtureVars {
  nn::Var mu;
  nn::Var b;
  nn::Var mode_logits;
  nn::Var mode_probs;

  LaplaceMixture values() const;
};

// MLP then GRU over the future horizon; heads for per-step location
// increments (summed into locations), scales (ELU + 1 + eps), and
// per-trajectory mode logits.
struct MdnDecoder {
  nn::Mlp input;
  nn::GruCell gru;
  nn::LinearLayer mu_head;
  nn::LinearLayer scale_head;
  nn::Mlp mode_head;  // over [h0, last state]
  int modes = 0;
  double eps = kScaleEpsilon;

  static MdnDecoder create(nn::ParamStore& store, const std::string& name, int in_dim, int hidden,
                           int modes, double eps = kScaleEpsilon);

  // successor: t_f x d relation encodings; aggregate: t_f x K(d+1);
  // h0: 1 x d initial decoder state.
  MixtureVars operator()(nn::Tape& tape, const nn::ParamStore& store, nn::Var successor,
                         nn::Var aggregate, nn::Var h0) const;
};

// Ground-truth future as t_f x 2.
using Future = nn::Matrix;

// argmin over modes of the summed per-step L2 error; ties to the lower index.
int best_mode(const LaplaceMixture& mix, const Future& y);

// (1 / t_f) * sum_t sum_coord [ log(2 b) + |y - mu| / b ] for one mode.
nn::Var laplace_nll(nn::Var mu, nn::Var b, const Future& y, int mode);

// softmax over modes of -(final-step L2 displacement) / tau.
Eigen::RowVectorXd soft_targets(const LaplaceMixture& mix, const Future& y, double tau = 1.0);

// sum_m -target_m log(max(pred_m, 1e-12)); targets carry no gradient.
nn::Var cls_loss(const Eigen::RowVectorXd& targets, nn::Var pred);

struct LossBundle {
  double l_pns = 0.0;
  double l_nll = 0.0;
  double l_cls = 0.0;
  double total = 0.0;
};

// lambda * l_pns + l_cls + l_nll, evaluated in that order.
nn::Var total_loss(nn::Var l_pns, nn::Var l_cls, nn::Var l_nll, double lambda);
LossBundle total_loss(double l_pns, double l_cls, double l_nll, double lambda);

}  // namespace pns
