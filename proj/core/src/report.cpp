#include "flmr/metrics/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "flmr/error.hpp"

namespace flmr::metrics {

namespace {

std::string format_double(double v) {
    std::array<char, 32> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

double ratio_or_inf(double numerator, double denominator) {
    if (denominator == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return numerator / denominator;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return out;
}

void write_error_csv(const std::filesystem::path& path, std::span<const double> errors) {
    auto out = open_output(path);
    out << "sample_index,p_err\n";
    const std::size_t n = std::min(errors.size(), kErrorDumpSamples);
    for (std::size_t i = 0; i < n; ++i) {
        out << i << ',' << format_double(errors[i]) << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

}  // namespace

std::vector<double> prediction_errors(const Eigen::VectorXd& predictions,
                                      const Eigen::VectorXd& targets) {
    if (predictions.size() != targets.size()) {
        throw ShapeError("prediction_errors: batch lengths differ");
    }
    std::vector<double> errors(static_cast<std::size_t>(predictions.size()));
    for (Eigen::Index i = 0; i < predictions.size(); ++i) {
        errors[static_cast<std::size_t>(i)] = predictions[i] - targets[i];
    }
    return errors;
}

ProvisioningStats provisioning_decomposition(std::span<const double> errors) {
    if (errors.empty()) {
        throw UsageError("provisioning_decomposition: empty error list");
    }
    ProvisioningStats stats;
    stats.sample_count = static_cast<std::int64_t>(errors.size());
    double abs_total = 0.0;
    for (const double e : errors) {
        if (e > 0.0) {
            stats.over_total += e;
            ++stats.over_count;
        } else if (e < 0.0) {
            stats.under_total += -e;
            ++stats.under_count;
        }
        abs_total += std::abs(e);
    }
    stats.mean_abs_error = abs_total / static_cast<double>(errors.size());
    return stats;
}

ComparisonReport compare(const ProvisioningStats& flmr, const ProvisioningStats& baseline) {
    ComparisonReport report;
    report.flmr = flmr;
    report.baseline = baseline;
    report.over_ratio = ratio_or_inf(baseline.over_total, flmr.over_total);
    report.under_ratio = ratio_or_inf(baseline.under_total, flmr.under_total);
    report.combined_ratio = ratio_or_inf(baseline.over_total + baseline.under_total,
                                         flmr.over_total + flmr.under_total);
    return report;
}

namespace detail {

nlohmann::json stats_to_json(const ProvisioningStats& stats) {
    return nlohmann::json{
        {"over_total", stats.over_total},       {"under_total", stats.under_total},
        {"over_count", stats.over_count},       {"under_count", stats.under_count},
        {"mean_abs_error", stats.mean_abs_error}, {"sample_count", stats.sample_count},
    };
}

nlohmann::json ratio_to_json(double ratio) {
    if (std::isinf(ratio)) {
        return "inf";
    }
    return ratio;
}

}  // namespace detail

void emit_reports(std::span<const fed::RoundResult> results,
                  std::span<const ProvisioningStats> per_round_stats, const ErrorDump& dump,
                  fed::LossKind loss_kind, const std::string& label,
                  const std::filesystem::path& out_dir) {
    if (results.empty()) {
        throw UsageError("emit_reports: no round results");
    }
    if (per_round_stats.size() != results.size()) {
        throw UsageError("emit_reports: per-round stats do not cover every round");
    }
    std::filesystem::create_directories(out_dir);

    {
        auto out = open_output(out_dir / "rounds.csv");
        out << "round,train_loss,train_phi,test_loss,test_phi\n";
        for (const auto& round : results) {
            double train_phi = 0.0;
            double test_phi = 0.0;
            double train_loss = 0.0;
            double test_loss = 0.0;
            for (const auto& cm : round.per_client) {
                train_phi += cm.train_phi;
                test_phi += cm.test_phi;
                train_loss += cm.train_loss;
                test_loss += cm.test_loss;
            }
            const auto k = static_cast<double>(round.per_client.size());
            train_phi /= k;
            test_phi /= k;
            if (loss_kind == fed::LossKind::kFlmr) {
                // The aggregate loss is defined through the aggregate
                // satisfaction, keeping loss == 1 - phi exact in the file.
                train_loss = 1.0 - train_phi;
                test_loss = 1.0 - test_phi;
            } else {
                train_loss /= k;
                test_loss /= k;
            }
            out << round.round << ',' << format_double(train_loss) << ','
                << format_double(train_phi) << ',' << format_double(test_loss) << ','
                << format_double(test_phi) << '\n';
        }
        if (!out) {
            throw IoError("failed writing rounds.csv");
        }
    }

    write_error_csv(out_dir / "errors_round0.csv", dump.first_round);
    write_error_csv(out_dir / "errors_final.csv", dump.final_round);

    {
        const auto& final_round = results.back();
        double final_phi = 0.0;
        for (const auto& cm : final_round.per_client) {
            final_phi += cm.test_phi;
        }
        final_phi /= static_cast<double>(final_round.per_client.size());
        const bool is_flmr = loss_kind == fed::LossKind::kFlmr;

        nlohmann::json summary;
        summary["label"] = label;
        summary["loss"] = is_flmr ? "flmr" : "deepcog";
        summary["rounds"] = results.size();
        summary["final_test_phi"] = final_phi;
        summary[is_flmr ? "flmr" : "baseline"] = detail::stats_to_json(per_round_stats.back());

        auto out = open_output(out_dir / "summary.json");
        out << summary.dump(2) << '\n';
        if (!out) {
            throw IoError("failed writing summary.json");
        }
    }
}

ProvisioningStats read_summary_stats(const std::filesystem::path& summary_path,
                                     const std::string& key) {
    std::ifstream in(summary_path);
    if (!in) {
        throw IoError("cannot open " + summary_path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(summary_path.string() + ": " + e.what());
    }
    if (!j.contains(key)) {
        throw SchemaError(summary_path.string() + ": missing key \"" + key + "\"");
    }
    const auto& s = j.at(key);
    ProvisioningStats stats;
    try {
        stats.over_total = s.at("over_total").get<double>();
        stats.under_total = s.at("under_total").get<double>();
        stats.over_count = s.at("over_count").get<std::int64_t>();
        stats.under_count = s.at("under_count").get<std::int64_t>();
        stats.mean_abs_error = s.at("mean_abs_error").get<double>();
        stats.sample_count = s.at("sample_count").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(summary_path.string() + ": bad \"" + key + "\" block: " + e.what());
    }
    return stats;
}

void write_comparison(const ComparisonReport& report, const std::filesystem::path& out_path) {
    nlohmann::json j;
    j["flmr"] = detail::stats_to_json(report.flmr);
    j["baseline"] = detail::stats_to_json(report.baseline);
    j["ratios"] = nlohmann::json{
        {"over_ratio", detail::ratio_to_json(report.over_ratio)},
        {"under_ratio", detail::ratio_to_json(report.under_ratio)},
        {"combined_ratio", detail::ratio_to_json(report.combined_ratio)},
    };
    auto out = open_output(out_path);
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing " + out_path.string());
    }
}

}  // namespace flmr::metrics
