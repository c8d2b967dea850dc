#pragma once

#include <utility>

#include "flmr/nn/mlp.hpp"

namespace flmr::nn {

/// Running averages for the AdaDelta recurrences, shape-congruent with the
/// ModelParams they optimize.
struct AdaDeltaState {
    std::vector<LayerTensors> accum_grad_sq;
    std::vector<LayerTensors> accum_update_sq;
    double rho = 0.85;
    double epsilon = 1e-6;
    double step_scale = 1.0;
};

/// Zero accumulators shaped like `params`.
AdaDeltaState make_adadelta_state(const ModelParams& params, double rho = 0.85,
                                  double epsilon = 1e-6, double step_scale = 1.0);

/// One update:
///   E[g^2]  <- rho E[g^2]  + (1 - rho) g^2
///   dx      <- -(sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps)) g * step_scale
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
///   params  <- params + dx
/// Throws NumericError naming the layer if a gradient is non-finite, and
/// ShapeError if params/grads/state disagree on shapes.
std::pair<ModelParams, AdaDeltaState> adadelta_step(const ModelParams& params,
                                                    const ParamGrads& grads,
                                                    const AdaDeltaState& state);

}  // namespace flmr::nn
