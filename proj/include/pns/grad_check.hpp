#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pns/autodiff.hpp"
#include "pns/params.hpp"

namespace pns::nn {

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates probed per tensor; all of them when negative.
  int max_coords = -1;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<tensor>[<row>,<col>]" of the worst coordinate
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coords = 0;     // coordinates compared
  std::size_t nonsmooth = 0;  // probes skipped for straddling a kink
};

// |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
double relative_error(double analytic, double numeric);

using InputLossFn = std::function<Var(Tape&, std::span<const Var>)>;
using ParamLossFn = std::function<Var(Tape&)>;

// Central differences against the tape's gradient with respect to each input
// matrix. fn must build a fresh scalar graph from the supplied leaves.
GradCheckResult grad_check(const InputLossFn& fn, std::vector<Matrix> inputs,
                           const GradCheckOptions& options = {});

// Same, with respect to every array in the store. fn reads parameters through
// tape.param(store, ...).
GradCheckResult grad_check_params(ParamStore& store, const ParamLossFn& fn,
                                  const GradCheckOptions& options = {});

}  // namespace pns::nn
