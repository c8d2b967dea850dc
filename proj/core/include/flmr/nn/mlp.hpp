#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace flmr::nn {

enum class HiddenActivation { kRelu };
enum class OutputActivation { kSigmoid };

/// Topology of the fixed three-layer regressor (input -> h1 -> h2 -> output).
struct MlpConfig {
    int input_dim = 5;
    std::array<int, 2> hidden_dims{64, 32};
    HiddenActivation hidden_activation = HiddenActivation::kRelu;
    OutputActivation output_activation = OutputActivation::kSigmoid;
    int output_dim = 1;
};

/// Throws ConfigError unless all dimensions are positive and output_dim == 1.
void validate(const MlpConfig& config);

/// One (weight matrix, bias vector) pair. Weights are (out x in); the same
/// shape structure carries parameters, gradients and optimizer accumulators.
struct LayerTensors {
    Eigen::MatrixXd w;
    Eigen::VectorXd b;
};

struct ModelParams {
    std::vector<LayerTensors> layers;
};

struct ParamGrads {
    std::vector<LayerTensors> layers;
};

/// Per-layer intermediates cached by forward() for one batch. Valid only for
/// the params that produced it.
struct ForwardTrace {
    Eigen::MatrixXd input;                           // batch x input_dim
    std::vector<Eigen::MatrixXd> pre_activations;    // batch x layer width
    std::vector<Eigen::MatrixXd> post_activations;   // batch x layer width
};

/// Glorot-uniform weights, zero biases. Deterministic for a given seed.
ModelParams init_params(const MlpConfig& config, std::uint64_t seed);

/// Runs the ReLU/ReLU/sigmoid chain over a batch (rows are samples).
/// Predictions are strictly inside (0, 1). Throws ShapeError on a feature
/// width mismatch.
std::pair<Eigen::VectorXd, ForwardTrace> forward(const ModelParams& params,
                                                 const Eigen::MatrixXd& features);

/// Chain rule through the cached trace. dloss_dpred holds the derivative of
/// the scalar batch loss with respect to each prediction, so the result is
/// the exact gradient of that loss for every parameter.
ParamGrads backward(const ModelParams& params, const ForwardTrace& trace,
                    const Eigen::VectorXd& dloss_dpred);

bool shapes_match(const ModelParams& a, const ModelParams& b);
std::size_t param_count(const ModelParams& params);
bool all_finite(const ModelParams& params);

}  // namespace flmr::nn
