#include "flmr/logic/real_logic.hpp"

#include <cmath>
#include <string>

#include "flmr/error.hpp"

namespace flmr::logic {

namespace {

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum_sq += d * d;
    }
    return std::sqrt(sum_sq);
}

}  // namespace

void validate(const FuzzyConfig& config) {
    if (!(config.alpha > 0.0)) {
        throw ConfigError("FuzzyConfig: alpha must be positive");
    }
    if (!(config.p >= 1.0)) {
        throw ConfigError("FuzzyConfig: p must be >= 1");
    }
}

double eq_predicate(std::span<const double> prediction, std::span<const double> target,
                    double alpha) {
    if (prediction.size() != target.size()) {
        throw ShapeError("eq_predicate: prediction length " + std::to_string(prediction.size()) +
                         " does not match target length " + std::to_string(target.size()));
    }
    return 1.0 / (1.0 + alpha * euclidean_distance(prediction, target));
}

std::vector<double> eq_gradient(std::span<const double> prediction, std::span<const double> target,
                                double alpha) {
    if (prediction.size() != target.size()) {
        throw ShapeError("eq_gradient: prediction length " + std::to_string(prediction.size()) +
                         " does not match target length " + std::to_string(target.size()));
    }
    const double d = euclidean_distance(prediction, target);
    std::vector<double> grad(prediction.size(), 0.0);
    if (d == 0.0) {
        return grad;  // zero subgradient at the kink; the predicate is already maximal
    }
    const double denom = d * (1.0 + alpha * d) * (1.0 + alpha * d);
    for (std::size_t j = 0; j < prediction.size(); ++j) {
        grad[j] = -alpha * (prediction[j] - target[j]) / denom;
    }
    return grad;
}

double forall_diag(std::span<const double> eq_values, double p) {
    if (eq_values.empty()) {
        throw UsageError("forall_diag: empty list of predicate values");
    }
    const double n = static_cast<double>(eq_values.size());
    double mean_err_p = 0.0;
    for (const double a : eq_values) {
        mean_err_p += std::pow(1.0 - a, p);
    }
    mean_err_p /= n;
    return 1.0 - std::pow(mean_err_p, 1.0 / p);
}

double satisfaction_loss(double phi) {
    if (!(phi >= 0.0 && phi <= 1.0)) {
        throw UsageError("satisfaction_loss: phi must lie in [0, 1]");
    }
    return 1.0 - phi;
}

SatisfactionReport evaluate_satisfaction(const Eigen::VectorXd& predictions,
                                         const Eigen::VectorXd& targets, const FuzzyConfig& cfg) {
    if (predictions.size() != targets.size()) {
        throw ShapeError("evaluate_satisfaction: batch lengths differ");
    }
    if (predictions.size() == 0) {
        throw UsageError("evaluate_satisfaction: empty batch");
    }
    SatisfactionReport report;
    report.per_sample_eq.resize(static_cast<std::size_t>(predictions.size()));
    for (Eigen::Index i = 0; i < predictions.size(); ++i) {
        const double d = std::abs(predictions[i] - targets[i]);
        report.per_sample_eq[static_cast<std::size_t>(i)] = 1.0 / (1.0 + cfg.alpha * d);
    }
    report.phi = forall_diag(report.per_sample_eq, cfg.p);
    report.loss = satisfaction_loss(report.phi);
    return report;
}

std::pair<SatisfactionReport, Eigen::VectorXd> loss_and_grad(const Eigen::VectorXd& predictions,
                                                             const Eigen::VectorXd& targets,
                                                             const FuzzyConfig& cfg) {
    SatisfactionReport report = evaluate_satisfaction(predictions, targets, cfg);

    const Eigen::Index n = predictions.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);

    // loss = M^(1/p) with M = (1/n) sum_i e_i^p and e_i = 1 - eq_i, so
    // dloss/deq_i = -(1/n) M^((1-p)/p) e_i^(p-1).
    double mean_err_p = 0.0;
    for (const double a : report.per_sample_eq) {
        mean_err_p += std::pow(1.0 - a, cfg.p);
    }
    mean_err_p *= inv_n;

    for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = predictions[i] - targets[i];
        const double d = std::abs(diff);
        double dloss_deq;
        if (cfg.p == 1.0) {
            dloss_deq = -inv_n;
        } else if (mean_err_p == 0.0) {
            dloss_deq = 0.0;  // every pair already matches; the loss is at its minimum
        } else {
            const double err = 1.0 - report.per_sample_eq[static_cast<std::size_t>(i)];
            dloss_deq = -inv_n * std::pow(mean_err_p, (1.0 - cfg.p) / cfg.p) *
                        std::pow(err, cfg.p - 1.0);
        }
        double deq_dpred = 0.0;
        if (d > 0.0) {
            const double one_plus = 1.0 + cfg.alpha * d;
            deq_dpred = -cfg.alpha * (diff / d) / (one_plus * one_plus);
        }
        grad[i] = dloss_deq * deq_dpred;
    }
    return {std::move(report), std::move(grad)};
}

}  // namespace flmr::logic
