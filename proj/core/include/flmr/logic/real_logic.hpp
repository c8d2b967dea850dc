#pragma once

#include <Eigen/Core>
#include <span>
#include <utility>
#include <vector>

namespace flmr::logic {

/// Parameters of the smooth-equality predicate and its universal aggregator.
struct FuzzyConfig {
    double alpha = 0.5;  // smoothness constant of the equality predicate
    double p = 2.0;      // exponent of the p-mean-error aggregator (p = 1 is the plain mean)
};

/// Throws ConfigError unless alpha > 0 and p >= 1.
void validate(const FuzzyConfig& config);

/// Satisfaction of the equality axiom over one batch. loss is stored as
/// exactly 1 - phi.
struct SatisfactionReport {
    double phi = 0.0;
    std::vector<double> per_sample_eq;
    double loss = 1.0;
};

/// Smooth equality: 1 / (1 + alpha * ||prediction - target||). Equals 1 iff
/// the vectors coincide and decreases strictly with their Euclidean distance.
double eq_predicate(std::span<const double> prediction, std::span<const double> target,
                    double alpha);

/// Derivative of eq_predicate with respect to each prediction component. The
/// distance-zero kink takes the zero subgradient.
std::vector<double> eq_gradient(std::span<const double> prediction, std::span<const double> target,
                                double alpha);

/// Universal quantification over sample-wise (prediction, target) pairs:
/// phi = 1 - ((1/N) sum_i (1 - a_i)^p)^(1/p). Throws UsageError on an empty
/// list.
double forall_diag(std::span<const double> eq_values, double p);

/// Exactly 1 - phi. Throws UsageError for phi outside [0, 1].
double satisfaction_loss(double phi);

/// Full chain eq -> forall -> loss over a scalar-prediction batch, plus the
/// exact gradient of the loss with respect to each prediction.
std::pair<SatisfactionReport, Eigen::VectorXd> loss_and_grad(const Eigen::VectorXd& predictions,
                                                             const Eigen::VectorXd& targets,
                                                             const FuzzyConfig& cfg);

/// The report half of loss_and_grad (used by evaluation paths that do not
/// need the gradient).
SatisfactionReport evaluate_satisfaction(const Eigen::VectorXd& predictions,
                                         const Eigen::VectorXd& targets, const FuzzyConfig& cfg);

}  // namespace flmr::logic
