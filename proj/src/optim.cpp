#include "pns/optim.hpp"

#include <cmath>

#include "pns/errors.hpp"

namespace pns {

AdamState::AdamState(const nn::ParamStore& store) {
  m.reserve(store.size());
  v.reserve(store.size());
  for (const auto& p : store) {
    m.push_back(nn::Matrix::Zero(p.value.rows(), p.value.cols()));
    v.push_back(nn::Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void adam_step(nn::ParamStore& params, const nn::GradBuffer& grads, AdamState& state,
               const AdamConfig& config) {
  if (state.m.size() != params.size() || grads.size() != params.size()) {
    throw ShapeMismatch("adam: state, gradients and parameters disagree");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].value;
    const auto& g = grads[i];
    if (g.rows() != w.rows() || g.cols() != w.cols()) {
      throw ShapeMismatch("adam: gradient shape differs from " + params[i].name);
    }
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g.cwiseProduct(g);
    w.array() -= config.lr * (state.m[i].array() / c1) /
                 ((state.v[i].array() / c2).sqrt() + config.eps);
  }
}

double clip_grad_norm(nn::GradBuffer& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (max_norm > 0 && norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

}  // namespace pns
