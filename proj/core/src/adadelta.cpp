#include "flmr/nn/adadelta.hpp"

#include <cmath>
#include <string>

#include "flmr/error.hpp"

namespace flmr::nn {

namespace {

bool congruent(const std::vector<LayerTensors>& a, const std::vector<LayerTensors>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t l = 0; l < a.size(); ++l) {
        if (a[l].w.rows() != b[l].w.rows() || a[l].w.cols() != b[l].w.cols() ||
            a[l].b.size() != b[l].b.size()) {
            return false;
        }
    }
    return true;
}

}  // namespace

AdaDeltaState make_adadelta_state(const ModelParams& params, double rho, double epsilon,
                                  double step_scale) {
    if (!(rho > 0.0 && rho < 1.0)) {
        throw ConfigError("AdaDelta: rho must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("AdaDelta: epsilon must be positive");
    }
    AdaDeltaState state;
    state.rho = rho;
    state.epsilon = epsilon;
    state.step_scale = step_scale;
    state.accum_grad_sq.reserve(params.layers.size());
    state.accum_update_sq.reserve(params.layers.size());
    for (const auto& layer : params.layers) {
        LayerTensors zero;
        zero.w = Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols());
        zero.b = Eigen::VectorXd::Zero(layer.b.size());
        state.accum_grad_sq.push_back(zero);
        state.accum_update_sq.push_back(std::move(zero));
    }
    return state;
}

std::pair<ModelParams, AdaDeltaState> adadelta_step(const ModelParams& params,
                                                    const ParamGrads& grads,
                                                    const AdaDeltaState& state) {
    if (!congruent(params.layers, grads.layers) ||
        !congruent(params.layers, state.accum_grad_sq) ||
        !congruent(params.layers, state.accum_update_sq)) {
        throw ShapeError("adadelta_step: params, grads and state are not shape-congruent");
    }
    for (std::size_t l = 0; l < grads.layers.size(); ++l) {
        if (!grads.layers[l].w.allFinite() || !grads.layers[l].b.allFinite()) {
            throw NumericError("adadelta_step: non-finite gradient in layer " + std::to_string(l));
        }
    }

    ModelParams next = params;
    AdaDeltaState next_state = state;
    const double rho = state.rho;
    const double eps = state.epsilon;
    const double scale = state.step_scale;

    auto update = [&](auto& value, const auto& g, auto& eg2, auto& ex2) {
        eg2 = (rho * eg2.array() + (1.0 - rho) * g.array().square()).matrix();
        const auto dx =
            (-scale * ((ex2.array() + eps).sqrt() / (eg2.array() + eps).sqrt()) * g.array()).eval();
        ex2 = (rho * ex2.array() + (1.0 - rho) * dx.square()).matrix();
        value = (value.array() + dx).matrix();
    };

    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(next.layers[l].w, grads.layers[l].w, next_state.accum_grad_sq[l].w,
               next_state.accum_update_sq[l].w);
        update(next.layers[l].b, grads.layers[l].b, next_state.accum_grad_sq[l].b,
               next_state.accum_update_sq[l].b);
    }
    return {std::move(next), std::move(next_state)};
}

}  // namespace flmr::nn
