#include "pns/kernels.hpp"

#include <exception>

#include <omp.h>

namespace pns {

namespace {

BatchGradient reduce(const Model& model, std::vector<nn::GradBuffer>& parts,
                     const std::vector<LossBundle>& losses) {
  BatchGradient out{nn::GradBuffer(model.params()), {}};
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.grads.add(parts[i]);
    out.loss.l_pns += losses[i].l_pns;
    out.loss.l_nll += losses[i].l_nll;
    out.loss.l_cls += losses[i].l_cls;
    out.loss.total += losses[i].total;
  }
  return out;
}

nn::Mask mask_for(const Scene& s, const std::optional<CandidateFilter>& filter) {
  return filter ? candidate_filter(s, *filter) : default_candidates(s);
}

// Exceptions cannot leave an OpenMP region. Each item records its own and the
// lowest failing index is rethrown, which is what the serial twin would raise.
template <class Body>
void parallel_items(long n, Body&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

BatchGradient batch_gradient_serial(const Model& model, const std::vector<const Scene*>& batch) {
  std::vector<nn::GradBuffer> parts(batch.size(), nn::GradBuffer(model.params()));
  std::vector<LossBundle> losses(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    losses[i] = model.loss_and_grad(*batch[i], parts[i]);
  }
  return reduce(model, parts, losses);
}

BatchGradient batch_gradient(const Model& model, const std::vector<const Scene*>& batch) {
  const auto n = static_cast<long>(batch.size());
  std::vector<nn::GradBuffer> parts(batch.size(), nn::GradBuffer(model.params()));
  std::vector<LossBundle> losses(batch.size());
  parallel_items(n, [&](long i) { losses[i] = model.loss_and_grad(*batch[i], parts[i]); });
  return reduce(model, parts, losses);
}

std::vector<Prediction> predict_batch_serial(const Model& model, const std::vector<Scene>& scenes) {
  std::vector<Prediction> out(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) out[i] = model.predict(scenes[i]);
  return out;
}

std::vector<Prediction> predict_batch(const Model& model, const std::vector<Scene>& scenes) {
  const auto n = static_cast<long>(scenes.size());
  std::vector<Prediction> out(scenes.size());
  parallel_items(n, [&](long i) { out[i] = model.predict(scenes[i]); });
  return out;
}

std::vector<PredecessorLabels> label_batch_serial(const std::vector<Scene>& scenes,
                                                  DistanceMetric metric,
                                                  const std::optional<CandidateFilter>& filter) {
  std::vector<PredecessorLabels> out(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    out[i] = label_predecessors(scenes[i], mask_for(scenes[i], filter), metric);
  }
  return out;
}

std::vector<PredecessorLabels> label_batch(const std::vector<Scene>& scenes, DistanceMetric metric,
                                           const std::optional<CandidateFilter>& filter) {
  const auto n = static_cast<long>(scenes.size());
  std::vector<PredecessorLabels> out(scenes.size());
  parallel_items(n, [&](long i) {
    out[i] = label_predecessors(scenes[i], mask_for(scenes[i], filter), metric);
  });
  return out;
}

void set_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace pns
