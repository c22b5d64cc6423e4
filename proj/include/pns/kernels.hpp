#pragma once

#include <vector>

#include "pns/model.hpp"
#include "pns/tracing.hpp"

namespace pns {

// Scene-parallel kernels. Each has a serial reference twin; both reduce in
// scene order so their results agree bit for bit.

struct BatchGradient {
  nn::GradBuffer grads;  // summed over the batch
  LossBundle loss;       // summed over the batch
};

BatchGradient batch_gradient(const Model& model, const std::vector<const Scene*>& batch);
BatchGradient batch_gradient_serial(const Model& model, const std::vector<const Scene*>& batch);

std::vector<Prediction> predict_batch(const Model& model, const std::vector<Scene>& scenes);
std::vector<Prediction> predict_batch_serial(const Model& model, const std::vector<Scene>& scenes);

// Labels every scene against its candidate mask (the default rule, then the
// filter when given).
std::vector<PredecessorLabels> label_batch(const std::vector<Scene>& scenes, DistanceMetric metric,
                                           const std::optional<CandidateFilter>& filter = {});
std::vector<PredecessorLabels> label_batch_serial(const std::vector<Scene>& scenes,
                                                  DistanceMetric metric,
                                                  const std::optional<CandidateFilter>& filter = {});

// Sets the OpenMP thread count; 0 keeps the runtime default.
void set_threads(int threads);

}  // namespace pns
