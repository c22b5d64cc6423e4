#include "pns/mdn.hpp"

#include <cmath>

#include "pns/errors.hpp"

namespace pns {

using nn::Matrix;
using nn::Tape;
using nn::Var;

LaplaceMixture MixtureVars::values() const {
  return {mu.value(), b.value(), mode_probs.value().row(0)};
}

MdnDecoder MdnDecoder::create(nn::ParamStore& store, const std::string& name, int in_dim,
                              int hidden, int modes, double eps) {
  MdnDecoder dec;
  dec.input = nn::Mlp::create(store, name + ".in", {in_dim, hidden, hidden});
  dec.gru = nn::GruCell::create(store, name + ".gru", hidden, hidden);
  dec.mu_head = nn::LinearLayer::create(store, name + ".mu", hidden, 2 * modes);
  dec.scale_head = nn::LinearLayer::create(store, name + ".scale", hidden, 2 * modes);
  dec.mode_head = nn::Mlp::create(store, name + ".mode", {2 * hidden, hidden, modes});
  dec.modes = modes;
  dec.eps = eps;
  return dec;
}

MixtureVars MdnDecoder::operator()(Tape& tape, const nn::ParamStore& store, Var successor,
                                   Var aggregate, Var h0) const {
  if (successor.rows() != aggregate.rows()) throw ShapeMismatch("decode: horizon mismatch");
  const auto t_f = successor.rows();
  Var x = input(tape, store, nn::concat_cols({successor, aggregate}));
  std::vector<Var> states;
  states.reserve(static_cast<std::size_t>(t_f));
  Var h = h0;
  for (Eigen::Index t = 0; t < t_f; ++t) {
    h = gru.step(tape, store, nn::slice_rows(x, t, 1), h);
    states.push_back(h);
  }
  Var hs = nn::concat_rows(states);
  MixtureVars out;
  // Heads emit per-step displacements; locations are their running sum.
  const nn::Matrix cumulative =
      nn::Matrix(nn::Matrix::Ones(t_f, t_f).triangularView<Eigen::Lower>());
  out.mu = nn::matmul(tape.constant(cumulative), mu_head(tape, store, hs));
  out.b = nn::elu_plus_one(scale_head(tape, store, hs), eps);
  out.mode_logits = mode_head(tape, store, nn::concat_cols({h0, h}));
  out.mode_probs = nn::softmax_rows(out.mode_logits);
  return out;
}

namespace {

void check_future(const LaplaceMixture& mix, const Future& y) {
  if (y.rows() != mix.steps() || y.cols() != 2) throw ShapeMismatch("future must be t_f x 2");
}

}  // namespace

int best_mode(const LaplaceMixture& mix, const Future& y) {
  check_future(mix, y);
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int m = 0; m < mix.modes(); ++m) {
    double err = 0.0;
    for (int t = 0; t < mix.steps(); ++t) {
      const double dx = mix.mu(t, 2 * m) - y(t, 0);
      const double dy = mix.mu(t, 2 * m + 1) - y(t, 1);
      err += std::sqrt(dx * dx + dy * dy);
    }
    if (err < best_err) {
      best_err = err;
      best = m;
    }
  }
  return best;
}

Var laplace_nll(Var mu, Var b, const Future& y, int mode) {
  if (mu.rows() != y.rows() || b.rows() != y.rows() || mu.cols() != b.cols() ||
      2 * mode + 1 >= mu.cols() || mode < 0) {
    throw ShapeMismatch("laplace_nll: shapes or mode index");
  }
  const auto t_f = y.rows();
  const double inv_t = 1.0 / static_cast<double>(t_f);
  Matrix dmu = Matrix::Zero(mu.rows(), mu.cols());
  Matrix db = Matrix::Zero(b.rows(), b.cols());
  double loss = 0.0;
  for (Eigen::Index t = 0; t < t_f; ++t) {
    for (int c = 0; c < 2; ++c) {
      const Eigen::Index col = 2 * mode + c;
      const double scale = b.value()(t, col);
      const double diff = y(t, c) - mu.value()(t, col);
      loss += std::log(2.0 * scale) + std::abs(diff) / scale;
      const double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
      mu.tape().note_branch(static_cast<std::uint64_t>(sgn + 2.0));
      dmu(t, col) = -sgn / scale * inv_t;
      db(t, col) = (1.0 / scale - std::abs(diff) / (scale * scale)) * inv_t;
    }
  }
  Matrix value(1, 1);
  value(0, 0) = loss * inv_t;
  return mu.tape().push(std::move(value), {mu, b}, [mu, b, dmu, db](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    if (t.requires_grad(mu.id())) t.grad(mu.id()) += g * dmu;
    if (t.requires_grad(b.id())) t.grad(b.id()) += g * db;
  });
}

Eigen::RowVectorXd soft_targets(const LaplaceMixture& mix, const Future& y, double tau) {
  check_future(mix, y);
  if (tau <= 0) throw ConfigError("soft target temperature must be positive");
  const int last = mix.steps() - 1;
  Eigen::VectorXd logits(mix.modes());
  for (int m = 0; m < mix.modes(); ++m) {
    const double dx = mix.mu(last, 2 * m) - y(last, 0);
    const double dy = mix.mu(last, 2 * m + 1) - y(last, 1);
    logits(m) = -std::sqrt(dx * dx + dy * dy) / tau;
  }
  return nn::softmax(logits).transpose();
}

Var cls_loss(const Eigen::RowVectorXd& targets, Var pred) {
  constexpr double kFloor = 1e-12;
  if (pred.rows() != 1 || pred.cols() != targets.size()) throw ShapeMismatch("cls_loss: shapes");
  Matrix dp = Matrix::Zero(1, pred.cols());
  double loss = 0.0;
  for (Eigen::Index m = 0; m < pred.cols(); ++m) {
    const double p = pred.value()(0, m);
    loss -= targets(m) * std::log(std::max(p, kFloor));
    if (p > kFloor) dp(0, m) = -targets(m) / p;
    pred.tape().note_branch(p > kFloor ? 1 : 2);
  }
  Matrix value(1, 1);
  value(0, 0) = loss;
  return pred.tape().push(std::move(value), {pred}, [pred, dp](Tape& t, int self) {
    t.grad(pred.id()) += t.grad(self)(0, 0) * dp;
  });
}

Var total_loss(Var l_pns, Var l_cls, Var l_nll, double lambda) {
  if (lambda < 0) throw ConfigError("lambda must be >= 0");
  return nn::add(nn::add(nn::scale(l_pns, lambda), l_cls), l_nll);
}

LossBundle total_loss(double l_pns, double l_cls, double l_nll, double lambda) {
  if (lambda < 0) throw ConfigError("lambda must be >= 0");
  return {l_pns, l_nll, l_cls, lambda * l_pns + l_cls + l_nll};
}

}  // namespace pns
