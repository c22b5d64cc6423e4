#pragma once

#include <string>

#include "pns/model.hpp"
#include "pns/scene.hpp"
#include "pns/tracing.hpp"

namespace pns {

// SVG of a scene: observed tracks (grey, successor dark), ground-truth future
// (green), predicted modes (red, opacity by mode probability) and labeled
// predecessors (orange rings on their last observed position). prediction
// may be null. Output depends only on the inputs.
std::string plot_scene(const Scene& scene, const Prediction* prediction,
                       const PredecessorLabels& labels);

}  // namespace pns
