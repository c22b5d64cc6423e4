#pragma once

#include <vector>

#include "pns/params.hpp"

namespace pns {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  long long step = 0;
  std::vector<nn::Matrix> m;
  std::vector<nn::Matrix> v;

  AdamState() = default;
  explicit AdamState(const nn::ParamStore& store);
};

// One bias-corrected adaptive-moment update of every parameter.
void adam_step(nn::ParamStore& params, const nn::GradBuffer& grads, AdamState& state,
               const AdamConfig& config);

// Rescales grads in place so their global L2 norm is at most max_norm and
// returns the norm before clipping. max_norm <= 0 leaves grads untouched.
double clip_grad_norm(nn::GradBuffer& grads, double max_norm);

}  // namespace pns
