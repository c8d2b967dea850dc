#include "flmr/nn/mlp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "flmr/error.hpp"
#include "flmr/rng.hpp"

namespace flmr::nn {

namespace {

// Keeps sigmoid outputs strictly inside (0, 1) even when the pre-activation
// saturates past double precision.
double sigmoid(double z) {
    double p;
    if (z >= 0.0) {
        p = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        p = e / (1.0 + e);
    }
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    static const double hi = std::nextafter(1.0, 0.0);
    return std::min(std::max(p, lo), hi);
}

std::vector<int> layer_widths(const MlpConfig& config) {
    return {config.input_dim, config.hidden_dims[0], config.hidden_dims[1], config.output_dim};
}

}  // namespace

void validate(const MlpConfig& config) {
    if (config.input_dim < 1) {
        throw ConfigError("MlpConfig: input_dim must be >= 1, got " + std::to_string(config.input_dim));
    }
    if (config.hidden_dims[0] < 1 || config.hidden_dims[1] < 1) {
        throw ConfigError("MlpConfig: hidden widths must be >= 1");
    }
    if (config.output_dim != 1) {
        throw ConfigError("MlpConfig: output_dim must be 1, got " + std::to_string(config.output_dim));
    }
}

ModelParams init_params(const MlpConfig& config, std::uint64_t seed) {
    validate(config);
    const auto widths = layer_widths(config);
    Rng rng(seed);
    ModelParams params;
    params.layers.reserve(widths.size() - 1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l];
        const int fan_out = widths[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        LayerTensors layer;
        layer.w.resize(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) {
                layer.w(r, c) = rng.uniform(-bound, bound);
            }
        }
        layer.b = Eigen::VectorXd::Zero(fan_out);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

std::pair<Eigen::VectorXd, ForwardTrace> forward(const ModelParams& params,
                                                 const Eigen::MatrixXd& features) {
    if (params.layers.empty()) {
        throw ShapeError("forward: model has no layers");
    }
    if (features.cols() != params.layers.front().w.cols()) {
        throw ShapeError("forward: feature width " + std::to_string(features.cols()) +
                         " does not match input_dim " +
                         std::to_string(params.layers.front().w.cols()));
    }

    ForwardTrace trace;
    trace.input = features;
    trace.pre_activations.reserve(params.layers.size());
    trace.post_activations.reserve(params.layers.size());

    const Eigen::MatrixXd* activation = &trace.input;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        Eigen::MatrixXd z = (*activation) * layer.w.transpose();
        z.rowwise() += layer.b.transpose();
        Eigen::MatrixXd a;
        if (l + 1 < params.layers.size()) {
            a = z.cwiseMax(0.0);  // ReLU
        } else {
            a = z.unaryExpr([](double v) { return sigmoid(v); });
        }
        trace.pre_activations.push_back(std::move(z));
        trace.post_activations.push_back(std::move(a));
        activation = &trace.post_activations.back();
    }

    Eigen::VectorXd predictions = trace.post_activations.back().col(0);
    return {std::move(predictions), std::move(trace)};
}

ParamGrads backward(const ModelParams& params, const ForwardTrace& trace,
                    const Eigen::VectorXd& dloss_dpred) {
    const std::size_t n_layers = params.layers.size();
    if (trace.pre_activations.size() != n_layers || trace.post_activations.size() != n_layers) {
        throw ShapeError("backward: trace does not cover every layer");
    }
    const Eigen::Index batch = trace.input.rows();
    if (dloss_dpred.size() != batch) {
        throw ShapeError("backward: dloss_dpred length " + std::to_string(dloss_dpred.size()) +
                         " does not match batch size " + std::to_string(batch));
    }
    for (std::size_t l = 0; l < n_layers; ++l) {
        if (trace.pre_activations[l].rows() != batch ||
            trace.pre_activations[l].cols() != params.layers[l].w.rows()) {
            throw ShapeError("backward: trace shape mismatch at layer " + std::to_string(l));
        }
    }
    if (trace.input.cols() != params.layers.front().w.cols()) {
        throw ShapeError("backward: trace input width does not match params");
    }

    ParamGrads grads;
    grads.layers.resize(n_layers);

    // Output layer: sigmoid' = p (1 - p).
    const Eigen::VectorXd& pred = trace.post_activations.back().col(0);
    Eigen::MatrixXd delta =
        (dloss_dpred.array() * pred.array() * (1.0 - pred.array())).matrix();

    for (std::size_t l = n_layers; l-- > 0;) {
        const Eigen::MatrixXd& below =
            (l == 0) ? trace.input : trace.post_activations[l - 1];
        grads.layers[l].w = delta.transpose() * below;
        grads.layers[l].b = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd upstream = delta * params.layers[l].w;
            // ReLU' as the indicator of a positive pre-activation.
            delta = (trace.pre_activations[l - 1].array() > 0.0)
                        .select(upstream, Eigen::MatrixXd::Zero(upstream.rows(), upstream.cols()));
        }
    }
    return grads;
}

bool shapes_match(const ModelParams& a, const ModelParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].w.rows() != b.layers[l].w.rows() ||
            a.layers[l].w.cols() != b.layers[l].w.cols() ||
            a.layers[l].b.size() != b.layers[l].b.size()) {
            return false;
        }
    }
    return true;
}

std::size_t param_count(const ModelParams& params) {
    std::size_t n = 0;
    for (const auto& layer : params.layers) {
        n += static_cast<std::size_t>(layer.w.size()) + static_cast<std::size_t>(layer.b.size());
    }
    return n;
}

bool all_finite(const ModelParams& params) {
    for (const auto& layer : params.layers) {
        if (!layer.w.allFinite() || !layer.b.allFinite()) return false;
    }
    return true;
}

}  // namespace flmr::nn
