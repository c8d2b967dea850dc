#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flmr/fed/federation.hpp"

namespace flmr::metrics {

/// Split of signed prediction errors into overprovisioning (positive part)
/// and underprovisioning (negative magnitude). Zero errors count in neither
/// bucket.
struct ProvisioningStats {
    double over_total = 0.0;
    double under_total = 0.0;
    std::int64_t over_count = 0;
    std::int64_t under_count = 0;
    double mean_abs_error = 0.0;
    std::int64_t sample_count = 0;
};

/// baseline / flmr ratios; a zero flmr denominator yields +infinity, which
/// the JSON writer encodes as the string "inf".
struct ComparisonReport {
    ProvisioningStats flmr;
    ProvisioningStats baseline;
    double over_ratio = 0.0;
    double under_ratio = 0.0;
    double combined_ratio = 0.0;
};

/// Element-wise signed error: prediction - target.
std::vector<double> prediction_errors(const Eigen::VectorXd& predictions,
                                      const Eigen::VectorXd& targets);

/// Throws UsageError when `errors` is empty.
ProvisioningStats provisioning_decomposition(std::span<const double> errors);

ComparisonReport compare(const ProvisioningStats& flmr, const ProvisioningStats& baseline);

/// How many per-sample errors the first/final round dumps keep.
inline constexpr std::size_t kErrorDumpSamples = 100;

/// Per-sample signed test errors captured at the first and final round.
struct ErrorDump {
    std::vector<double> first_round;
    std::vector<double> final_round;
};

/// Writes the run's file set into out_dir:
///   rounds.csv        round,train_loss,train_phi,test_loss,test_phi
///   errors_round0.csv sample_index,p_err   (first kErrorDumpSamples)
///   errors_final.csv  sample_index,p_err
///   summary.json      run label plus the final round's ProvisioningStats
/// For fuzzy-loss runs the emitted loss columns are recomputed as one minus
/// the emitted satisfaction means, so the loss/phi identity holds bit-exactly
/// in the files. Output is deterministic for identical inputs.
void emit_reports(std::span<const fed::RoundResult> results,
                  std::span<const ProvisioningStats> per_round_stats, const ErrorDump& dump,
                  fed::LossKind loss_kind, const std::string& label,
                  const std::filesystem::path& out_dir);

/// Reads the ProvisioningStats stored under `key` ("flmr" or "baseline") in
/// a summary.json written by emit_reports. Throws SchemaError when the key
/// is absent.
ProvisioningStats read_summary_stats(const std::filesystem::path& summary_path,
                                     const std::string& key);

/// Writes the merged comparison summary: keys flmr, baseline and ratios.
void write_comparison(const ComparisonReport& report, const std::filesystem::path& out_path);

}  // namespace flmr::metrics
