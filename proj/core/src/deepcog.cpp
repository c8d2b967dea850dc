#include "flmr/baseline/deepcog.hpp"

#include "flmr/error.hpp"

namespace flmr::baseline {

void validate(const DeepCogLossConfig& cfg) {
    if (!(cfg.alpha_penalty > 0.0) || !(cfg.epsilon_smooth > 0.0) || !(cfg.over_slope > 0.0)) {
        throw ConfigError("DeepCogLossConfig: alpha_penalty, epsilon_smooth and over_slope must be positive");
    }
    if (cfg.under_slope < 0.0) {
        throw ConfigError("DeepCogLossConfig: under_slope must be non-negative");
    }
    if (!(cfg.alpha_penalty / cfg.epsilon_smooth > cfg.over_slope)) {
        throw ConfigError("DeepCogLossConfig: alpha_penalty / epsilon_smooth must exceed over_slope");
    }
}

double deepcog_loss(double prediction, double target, const DeepCogLossConfig& cfg) {
    const double x = prediction - target;
    if (x >= 0.0) {
        return cfg.over_slope * x;
    }
    if (x >= -cfg.epsilon_smooth) {
        return cfg.alpha_penalty * (-x) / cfg.epsilon_smooth;
    }
    return cfg.alpha_penalty + cfg.under_slope * (-x - cfg.epsilon_smooth);
}

double deepcog_gradient(double prediction, double target, const DeepCogLossConfig& cfg) {
    const double x = prediction - target;
    if (x >= 0.0) {
        return cfg.over_slope;
    }
    if (x >= -cfg.epsilon_smooth) {
        return -cfg.alpha_penalty / cfg.epsilon_smooth;
    }
    return -cfg.under_slope;
}

std::pair<double, Eigen::VectorXd> deepcog_loss_and_grad(const Eigen::VectorXd& predictions,
                                                         const Eigen::VectorXd& targets,
                                                         const DeepCogLossConfig& cfg) {
    if (predictions.size() != targets.size()) {
        throw ShapeError("deepcog_loss_and_grad: batch lengths differ");
    }
    if (predictions.size() == 0) {
        throw UsageError("deepcog_loss_and_grad: empty batch");
    }
    const double inv_n = 1.0 / static_cast<double>(predictions.size());
    double total = 0.0;
    Eigen::VectorXd grad(predictions.size());
    for (Eigen::Index i = 0; i < predictions.size(); ++i) {
        total += deepcog_loss(predictions[i], targets[i], cfg);
        grad[i] = inv_n * deepcog_gradient(predictions[i], targets[i], cfg);
    }
    return {total * inv_n, std::move(grad)};
}

}  // namespace flmr::baseline
