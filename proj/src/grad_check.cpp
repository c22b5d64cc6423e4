#include "pns/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pns/errors.hpp"

namespace pns::nn {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

std::vector<Eigen::Index> pick_coords(Eigen::Index size, int max_coords, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(size));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (max_coords >= 0 && size > max_coords) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(max_coords));
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

struct Evaluation {
  double value;
  std::uint64_t signature;
};

// Shared driver: tensors are probed in place, eval() rebuilds the loss.
// Probes whose stencil changes the branch signature straddle a
// non-differentiable point and are counted instead of compared.
template <typename Eval>
void probe(Matrix& tensor, const Matrix& analytic, const std::string& name,
           const GradCheckOptions& options, std::uint64_t base_signature, std::mt19937_64& rng,
           Eval eval, GradCheckResult& result) {
  for (Eigen::Index flat : pick_coords(tensor.size(), options.max_coords, rng)) {
    double& slot = tensor.data()[flat];
    const double saved = slot;
    slot = saved + options.step;
    const Evaluation up = eval();
    slot = saved - options.step;
    const Evaluation down = eval();
    slot = saved;
    if (up.signature != base_signature || down.signature != base_signature) {
      ++result.nonsmooth;
      continue;
    }
    const double numeric = (up.value - down.value) / (2.0 * options.step);
    const double err = relative_error(analytic.data()[flat], numeric);
    ++result.coords;
    if (err > result.max_rel_error || !std::isfinite(err)) {
      result.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
      result.worst = name + "[" + std::to_string(flat % tensor.rows()) + "," +
                     std::to_string(flat / tensor.rows()) + "]";
      result.analytic = analytic.data()[flat];
      result.numeric = numeric;
    }
  }
}

}  // namespace

GradCheckResult grad_check(const InputLossFn& fn, std::vector<Matrix> inputs,
                           const GradCheckOptions& options) {
  std::vector<Matrix> analytic;
  std::uint64_t base_signature = 0;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& m : inputs) leaves.push_back(tape.leaf(m));
    Var loss = fn(tape, leaves);
    if (loss.rows() != 1 || loss.cols() != 1) throw ShapeMismatch("grad_check: loss is not scalar");
    tape.backward(loss);
    base_signature = tape.branch_signature();
    for (const Var& l : leaves) {
      analytic.push_back(tape.has_grad(l.id()) ? tape.grad(l) : Matrix::Zero(l.rows(), l.cols()));
    }
  }
  auto eval = [&]() {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& m : inputs) leaves.push_back(tape.constant(m));
    const double v = fn(tape, leaves).scalar();
    return Evaluation{v, tape.branch_signature()};
  };
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    probe(inputs[i], analytic[i], "input" + std::to_string(i), options, base_signature, rng, eval,
          result);
  }
  return result;
}

GradCheckResult grad_check_params(ParamStore& store, const ParamLossFn& fn,
                                  const GradCheckOptions& options) {
  GradBuffer analytic(store);
  std::uint64_t base_signature = 0;
  {
    Tape tape;
    Var loss = fn(tape);
    if (loss.rows() != 1 || loss.cols() != 1) throw ShapeMismatch("grad_check: loss is not scalar");
    tape.backward(loss);
    tape.accumulate(analytic);
    base_signature = tape.branch_signature();
  }
  auto eval = [&]() {
    Tape tape;
    const double v = fn(tape).scalar();
    return Evaluation{v, tape.branch_signature()};
  };
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t i = 0; i < store.size(); ++i) {
    probe(store[i].value, analytic[i], store[i].name, options, base_signature, rng, eval, result);
  }
  return result;
}

}  // namespace pns::nn
