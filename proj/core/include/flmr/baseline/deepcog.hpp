#pragma once

#include <Eigen/Core>
#include <utility>

namespace flmr::baseline {

/// Asymmetric capacity-forecast cost: a constant violation penalty reached
/// through a steep ramp on the underprovisioning side, plus a linear
/// overprovisioning cost. The invariant alpha_penalty / epsilon_smooth >
/// over_slope keeps underprovisioning the more expensive direction near zero.
struct DeepCogLossConfig {
    double alpha_penalty = 1.0;   // violation cost reached at the end of the ramp
    double epsilon_smooth = 0.05; // ramp width below zero
    double over_slope = 1.0;      // linear cost of predicting high
    double under_slope = 0.1;     // residual slope past the ramp, keeps gradients alive
};

/// Throws ConfigError when a constant is non-positive (under_slope may be 0)
/// or the asymmetry invariant fails.
void validate(const DeepCogLossConfig& cfg);

/// Piecewise-linear cost of prediction - target; continuous, non-negative,
/// zero only at an exact match.
double deepcog_loss(double prediction, double target, const DeepCogLossConfig& cfg);

/// Branch-wise derivative with respect to the prediction; breakpoints take
/// the right-hand derivative.
double deepcog_gradient(double prediction, double target, const DeepCogLossConfig& cfg);

/// Mean loss over a batch and its gradient per prediction.
std::pair<double, Eigen::VectorXd> deepcog_loss_and_grad(const Eigen::VectorXd& predictions,
                                                         const Eigen::VectorXd& targets,
                                                         const DeepCogLossConfig& cfg);

}  // namespace flmr::baseline
