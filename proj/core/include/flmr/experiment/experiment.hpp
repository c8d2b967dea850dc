#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "flmr/data/workload.hpp"
#include "flmr/fed/federation.hpp"
#include "flmr/metrics/report.hpp"

namespace flmr::cli {

/// Everything one experiment run needs. Clients either share the synthetic
/// generator settings (each with a seeded per-client perturbation) or load
/// client_<id>.csv files from data_dir; setting both is rejected.
struct ExperimentConfig {
    fed::FedConfig fed;
    data::GeneratorConfig gen;
    std::string data_dir;         // empty = synthetic generation
    double client_spread = 0.3;   // per-client traffic-max scale drawn from [1-s, 1+s]
    double test_fraction = 0.2;   // held-out share per client
    bool drop_exploded = true;    // drop invalid experiments before training
    unsigned workers = 0;         // 0 = one per hardware thread
    std::string out_dir;
    std::string label;            // defaults to the loss kind
};

/// One settable configuration entry. Every key works both as a
/// `key = value` line in a config file and as a --key command line flag.
struct ConfigKey {
    std::string name;
    std::string help;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

const std::vector<ConfigKey>& config_keys();

/// Applies one key=value pair. Throws ConfigError for an unknown key or an
/// unparseable value. `touched` (optional) records which keys were set.
void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value,
               std::set<std::string>* touched = nullptr);

/// Flat `key = value` file with # comments and blank lines.
void load_config_file(ExperimentConfig& cfg, const std::filesystem::path& path,
                      std::set<std::string>* touched = nullptr);

/// Rejects invalid key combinations (e.g. data_dir plus explicit generator
/// settings) and delegates to the per-module validators.
void validate(const ExperimentConfig& cfg, const std::set<std::string>& touched);

/// Builds the K per-client datasets: generated (with the per-client
/// perturbation) or loaded from data_dir, then explode-filtered, split and
/// normalized.
std::vector<data::ClientDataset> build_datasets(const ExperimentConfig& cfg);

/// Writes client_<id>.csv for every client into out_dir (raw generated
/// rows, before any filtering). Deterministic per seed.
void generate_datasets(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct RunArtifacts {
    std::vector<fed::RoundResult> rounds;
    metrics::ProvisioningStats final_stats;
    double final_test_phi = 0.0;
    std::filesystem::path out_dir;
};

/// Full training run: datasets -> federation -> per-round provisioning
/// stats -> report files in cfg.out_dir.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

/// Merges two single-run summaries into out_dir/summary.json with
/// baseline/flmr ratios.
metrics::ComparisonReport compare_summaries(const std::filesystem::path& flmr_summary,
                                            const std::filesystem::path& baseline_summary,
                                            const std::filesystem::path& out_dir);

/// The command line entry point (subcommands: generate, train, compare,
/// demo). Returns the process exit code: 0 success, 1 configuration error,
/// 2 runtime/numeric error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flmr::cli
