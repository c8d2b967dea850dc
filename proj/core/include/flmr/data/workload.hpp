#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace flmr::data {

/// One vBS telemetry row: five input features plus the measured CPU share
/// and the experiment-validity flag.
struct VbsRecord {
    int mcs_dl = 0;        // downlink MCS index, 0..28
    int mcs_ul = 0;        // uplink MCS index, 0..28
    double dl_kbps = 0.0;  // downlink traffic demand
    double ul_kbps = 0.0;  // uplink traffic demand
    int cpu_set = 0;       // computing-set identifier
    double cpu = 0.0;      // average CPU utilization in [0, 1]
    bool explode = false;  // true when the experiment overran its budget

    bool operator==(const VbsRecord&) const = default;
};

inline constexpr int kFeatureCount = 5;
inline constexpr int kMcsMax = 28;

/// Per-feature (min, max) in the order mcs_dl, mcs_ul, dl_kbps, ul_kbps,
/// cpu_set. MCS bounds are fixed at (0, 28); the rest are observed.
struct FeatureStats {
    std::array<std::pair<double, double>, kFeatureCount> min_max{};
};

/// One client's records, ordered with the training block first, plus the
/// normalization stats fitted on that training block only.
struct ClientDataset {
    int client_id = 0;
    std::vector<VbsRecord> records;
    std::size_t train_count = 0;
    FeatureStats feature_stats;

    std::span<const VbsRecord> train_records() const {
        return {records.data(), train_count};
    }
    std::span<const VbsRecord> test_records() const {
        return {records.data() + train_count, records.size() - train_count};
    }
};

/// Knobs of the synthetic telemetry generator. The defaults span CPU loads
/// of roughly [0.1, 1.0], with uplink decoding as the dominant cost.
struct GeneratorConfig {
    std::uint64_t seed = 42;
    std::size_t n_records = 2000;
    double ul_max_kbps = 20000.0;
    double dl_max_kbps = 50000.0;
    double base_load = 0.10;
    double ul_weight = 0.45;
    double dl_weight = 0.25;
    double mcs_ul_factor = 0.5;
    double mcs_dl_factor = 0.3;
    int cpu_set_count = 4;
    double cpu_set_offset_step = 0.02;
    double noise_sd = 0.02;
    double explode_threshold = 0.95;
};

void validate(const GeneratorConfig& cfg);

/// The deterministic part of the generator: CPU load before clamping, for
/// the given draws. Lower MCS indices raise the per-kbps coding cost.
double raw_cpu_load(const GeneratorConfig& cfg, double ul_kbps, double dl_kbps, int mcs_ul,
                    int mcs_dl, int cpu_set, double noise);

/// Draws n_records rows; deterministic for a given cfg.seed.
std::vector<VbsRecord> generate_synthetic(const GeneratorConfig& cfg);

/// Reads rows in the documented CSV schema. Columns are matched by header
/// name, order-insensitive. Throws SchemaError for a missing column,
/// ParseError for an unreadable cell and ValidationError for an
/// out-of-range value, each citing the offending location.
std::vector<VbsRecord> load_csv(const std::filesystem::path& path);

/// Writes the exact counterpart format: header
/// mcs_dl,mcs_ul,dl_kbps,ul_kbps,cpu_set,cpu,explode with explode as 0/1.
/// Doubles use shortest round-trip formatting, so load_csv(write_csv(r))
/// reproduces r exactly.
void write_csv(const std::filesystem::path& path, std::span<const VbsRecord> records);

/// Keeps only records with explode == false, preserving order.
std::vector<VbsRecord> filter_exploded(std::span<const VbsRecord> records);

/// Per-feature (min, max) over the given rows. Throws UsageError when empty.
FeatureStats fit_normalizer(std::span<const VbsRecord> records);

/// Min-max scaling into [0, 1]; degenerate features map to 0. Returns the
/// feature matrix (rows x 5) and the untouched cpu targets.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> normalize(std::span<const VbsRecord> records,
                                                      const FeatureStats& stats);

/// Seed-deterministic shuffled split with |test| = round(fraction * n),
/// round-half-to-even, capped so at least one training row remains. Throws
/// UsageError for fewer than two records.
std::pair<std::vector<VbsRecord>, std::vector<VbsRecord>> split(std::span<const VbsRecord> records,
                                                                double test_fraction,
                                                                std::uint64_t seed);

/// Splits, then fits normalization on the training block. Requires both
/// sides of the split to be non-empty.
ClientDataset make_client_dataset(int client_id, std::span<const VbsRecord> records,
                                  double test_fraction, std::uint64_t seed);

}  // namespace flmr::data
