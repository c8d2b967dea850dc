#include "flmr/experiment/experiment.hpp"

#include <charconv>
#include <fstream>
#include <string_view>
#include <utility>

#include "flmr/error.hpp"
#include "flmr/nn/mlp.hpp"
#include "flmr/rng.hpp"

namespace flmr::cli {

namespace {

// Stream tags sit far above any round index so per-purpose streams never
// collide with the per-round training streams.
constexpr std::uint64_t kGenStreamTag = 0xA00100000001ULL;
constexpr std::uint64_t kSpreadStreamTag = 0xA00100000002ULL;
constexpr std::uint64_t kSplitStreamTag = 0xA00100000003ULL;

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
    throw ConfigError("key " + key + ": cannot parse \"" + value + "\" as " + expected);
}

long long parse_ll(const std::string& key, const std::string& value) {
    long long v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        bad_value(key, value, "an integer");
    }
    return v;
}

int parse_int(const std::string& key, const std::string& value) {
    return static_cast<int>(parse_ll(key, value));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        bad_value(key, value, "an unsigned integer");
    }
    return v;
}

double parse_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        bad_value(key, value, "a number");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "a boolean (true/false/1/0)");
}

fed::LossKind parse_loss(const std::string& key, const std::string& value) {
    if (value == "flmr") return fed::LossKind::kFlmr;
    if (value == "deepcog") return fed::LossKind::kDeepCog;
    bad_value(key, value, "a loss kind (flmr/deepcog)");
}

std::vector<ConfigKey> make_config_keys() {
    using C = ExperimentConfig;
    std::vector<ConfigKey> keys;
    auto add = [&keys](std::string name, std::string help,
                       std::function<void(C&, const std::string&)> set) {
        keys.push_back(ConfigKey{std::move(name), std::move(help), std::move(set)});
    };

    add("run.label", "Label written into summary.json",
        [](C& c, const std::string& v) { c.label = v; });
    add("out.dir", "Output directory for report files",
        [](C& c, const std::string& v) { c.out_dir = v; });
    add("data.dir", "Directory with client_<id>.csv files (default: synthetic generation)",
        [](C& c, const std::string& v) { c.data_dir = v; });

    add("fl.K", "Number of clients (vBS instances)",
        [](C& c, const std::string& v) { c.fed.clients = parse_int("fl.K", v); });
    add("fl.T", "Number of federation rounds",
        [](C& c, const std::string& v) { c.fed.rounds = parse_int("fl.T", v); });
    add("fl.L", "Local epochs per round",
        [](C& c, const std::string& v) { c.fed.local_epochs = parse_int("fl.L", v); });
    add("fl.batch_size", "Local mini-batch size",
        [](C& c, const std::string& v) { c.fed.batch_size = parse_int("fl.batch_size", v); });
    add("fl.participants", "Clients aggregated per round (0 = all)",
        [](C& c, const std::string& v) { c.fed.participants = parse_int("fl.participants", v); });
    add("fl.loss", "Training loss: flmr or deepcog",
        [](C& c, const std::string& v) { c.fed.loss_kind = parse_loss("fl.loss", v); });
    add("fl.seed", "Base seed for every derived stream",
        [](C& c, const std::string& v) { c.fed.seed = parse_u64("fl.seed", v); });
    add("fl.test_fraction", "Held-out share per client",
        [](C& c, const std::string& v) { c.test_fraction = parse_double("fl.test_fraction", v); });
    add("fl.drop_exploded", "Drop rows flagged explode before training",
        [](C& c, const std::string& v) { c.drop_exploded = parse_bool("fl.drop_exploded", v); });
    add("fl.workers", "Parallel client workers (0 = one per hardware thread)",
        [](C& c, const std::string& v) { c.workers = static_cast<unsigned>(parse_ll("fl.workers", v)); });

    add("opt.rho", "AdaDelta accumulator decay",
        [](C& c, const std::string& v) { c.fed.optimizer.rho = parse_double("opt.rho", v); });
    add("opt.epsilon", "AdaDelta stabilizer",
        [](C& c, const std::string& v) { c.fed.optimizer.epsilon = parse_double("opt.epsilon", v); });
    add("opt.step_scale", "Global multiplier on AdaDelta updates",
        [](C& c, const std::string& v) { c.fed.optimizer.step_scale = parse_double("opt.step_scale", v); });

    add("fuzzy.alpha", "Smoothness constant of the equality predicate",
        [](C& c, const std::string& v) { c.fed.fuzzy.alpha = parse_double("fuzzy.alpha", v); });
    add("fuzzy.p", "Exponent of the p-mean-error aggregator",
        [](C& c, const std::string& v) { c.fed.fuzzy.p = parse_double("fuzzy.p", v); });

    add("mlp.hidden1", "First hidden layer width",
        [](C& c, const std::string& v) { c.fed.mlp.hidden_dims[0] = parse_int("mlp.hidden1", v); });
    add("mlp.hidden2", "Second hidden layer width",
        [](C& c, const std::string& v) { c.fed.mlp.hidden_dims[1] = parse_int("mlp.hidden2", v); });

    add("deepcog.alpha_penalty", "Violation cost at the end of the ramp",
        [](C& c, const std::string& v) {
            c.fed.deepcog.alpha_penalty = parse_double("deepcog.alpha_penalty", v);
        });
    add("deepcog.epsilon_smooth", "Ramp width below zero",
        [](C& c, const std::string& v) {
            c.fed.deepcog.epsilon_smooth = parse_double("deepcog.epsilon_smooth", v);
        });
    add("deepcog.over_slope", "Linear overprovisioning cost rate",
        [](C& c, const std::string& v) {
            c.fed.deepcog.over_slope = parse_double("deepcog.over_slope", v);
        });
    add("deepcog.under_slope", "Residual slope past the ramp",
        [](C& c, const std::string& v) {
            c.fed.deepcog.under_slope = parse_double("deepcog.under_slope", v);
        });

    add("gen.n_records", "Synthetic rows per client",
        [](C& c, const std::string& v) {
            c.gen.n_records = static_cast<std::size_t>(parse_ll("gen.n_records", v));
        });
    add("gen.ul_max_kbps", "Uplink traffic ceiling",
        [](C& c, const std::string& v) { c.gen.ul_max_kbps = parse_double("gen.ul_max_kbps", v); });
    add("gen.dl_max_kbps", "Downlink traffic ceiling",
        [](C& c, const std::string& v) { c.gen.dl_max_kbps = parse_double("gen.dl_max_kbps", v); });
    add("gen.base_load", "CPU load floor",
        [](C& c, const std::string& v) { c.gen.base_load = parse_double("gen.base_load", v); });
    add("gen.ul_weight", "Uplink traffic weight",
        [](C& c, const std::string& v) { c.gen.ul_weight = parse_double("gen.ul_weight", v); });
    add("gen.dl_weight", "Downlink traffic weight",
        [](C& c, const std::string& v) { c.gen.dl_weight = parse_double("gen.dl_weight", v); });
    add("gen.mcs_ul_factor", "Uplink low-MCS cost factor",
        [](C& c, const std::string& v) {
            c.gen.mcs_ul_factor = parse_double("gen.mcs_ul_factor", v);
        });
    add("gen.mcs_dl_factor", "Downlink low-MCS cost factor",
        [](C& c, const std::string& v) {
            c.gen.mcs_dl_factor = parse_double("gen.mcs_dl_factor", v);
        });
    add("gen.cpu_set_count", "Number of computing sets",
        [](C& c, const std::string& v) { c.gen.cpu_set_count = parse_int("gen.cpu_set_count", v); });
    add("gen.cpu_set_offset_step", "CPU offset per computing set",
        [](C& c, const std::string& v) {
            c.gen.cpu_set_offset_step = parse_double("gen.cpu_set_offset_step", v);
        });
    add("gen.noise_sd", "Gaussian noise on the CPU load",
        [](C& c, const std::string& v) { c.gen.noise_sd = parse_double("gen.noise_sd", v); });
    add("gen.explode_threshold", "Raw load above which a row is flagged explode",
        [](C& c, const std::string& v) {
            c.gen.explode_threshold = parse_double("gen.explode_threshold", v);
        });
    add("gen.client_spread", "Half-range of the per-client traffic-max scale",
        [](C& c, const std::string& v) {
            c.client_spread = parse_double("gen.client_spread", v);
        });
    return keys;
}

std::vector<data::VbsRecord> generate_client_records(const ExperimentConfig& cfg, int client_id) {
    auto gen = cfg.gen;
    gen.seed = derive_stream(cfg.fed.seed, static_cast<std::uint64_t>(client_id), kGenStreamTag);
    Rng spread(derive_stream(cfg.fed.seed, static_cast<std::uint64_t>(client_id), kSpreadStreamTag));
    const double factor = spread.uniform(1.0 - cfg.client_spread, 1.0 + cfg.client_spread);
    gen.ul_max_kbps *= factor;
    gen.dl_max_kbps *= factor;
    return data::generate_synthetic(gen);
}

std::string trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string_view::npos) {
        return {};
    }
    const auto end = s.find_last_not_of(" \t");
    return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = make_config_keys();
    return keys;
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value,
               std::set<std::string>* touched) {
    for (const auto& entry : config_keys()) {
        if (entry.name == key) {
            entry.set(cfg, value);
            if (touched != nullptr) {
                touched->insert(key);
            }
            return;
        }
    }
    throw ConfigError("unknown configuration key \"" + key + "\"");
}

void load_config_file(ExperimentConfig& cfg, const std::filesystem::path& path,
                      std::set<std::string>* touched) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string stripped = trim(line);
        if (stripped.empty()) {
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected key = value");
        }
        const std::string key = trim(std::string_view(stripped).substr(0, eq));
        const std::string value = trim(std::string_view(stripped).substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": empty key");
        }
        apply_key(cfg, key, value, touched);
    }
}

void validate(const ExperimentConfig& cfg, const std::set<std::string>& touched) {
    if (!cfg.data_dir.empty()) {
        for (const auto& key : touched) {
            if (key.starts_with("gen.")) {
                throw ConfigError("data.dir and generator settings are mutually exclusive (got " +
                                  key + ")");
            }
        }
    }
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
        throw ConfigError("fl.test_fraction must lie in (0, 1)");
    }
    if (!(cfg.client_spread >= 0.0 && cfg.client_spread < 1.0)) {
        throw ConfigError("gen.client_spread must lie in [0, 1)");
    }
    fed::validate(cfg.fed);
    if (cfg.data_dir.empty()) {
        data::validate(cfg.gen);
    }
}

std::vector<data::ClientDataset> build_datasets(const ExperimentConfig& cfg) {
    std::vector<data::ClientDataset> datasets;
    datasets.reserve(static_cast<std::size_t>(cfg.fed.clients));
    for (int k = 0; k < cfg.fed.clients; ++k) {
        std::vector<data::VbsRecord> records;
        if (cfg.data_dir.empty()) {
            records = generate_client_records(cfg, k);
        } else {
            const auto path =
                std::filesystem::path(cfg.data_dir) / ("client_" + std::to_string(k) + ".csv");
            if (!std::filesystem::exists(path)) {
                throw ConfigError("missing dataset file " + path.string());
            }
            records = data::load_csv(path);
        }
        if (cfg.drop_exploded) {
            records = data::filter_exploded(records);
        }
        datasets.push_back(data::make_client_dataset(
            k, records, cfg.test_fraction,
            derive_stream(cfg.fed.seed, static_cast<std::uint64_t>(k), kSplitStreamTag)));
    }
    return datasets;
}

void generate_datasets(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    if (cfg.fed.clients < 1) {
        throw ConfigError("fl.K must be >= 1");
    }
    data::validate(cfg.gen);
    std::filesystem::create_directories(out_dir);
    for (int k = 0; k < cfg.fed.clients; ++k) {
        const auto records = generate_client_records(cfg, k);
        data::write_csv(out_dir / ("client_" + std::to_string(k) + ".csv"), records);
    }
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
    if (cfg.out_dir.empty()) {
        throw ConfigError("no output directory set (use --out, out.dir or FLMR_OUT_DIR)");
    }
    fed::validate(cfg.fed);

    auto datasets = build_datasets(cfg);
    std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> test_blocks;
    test_blocks.reserve(datasets.size());
    for (const auto& dataset : datasets) {
        test_blocks.push_back(data::normalize(dataset.test_records(), dataset.feature_stats));
    }

    auto results = fed::run_federation(cfg.fed, std::move(datasets), cfg.workers);

    std::vector<metrics::ProvisioningStats> stats;
    stats.reserve(results.size());
    metrics::ErrorDump dump;
    for (std::size_t t = 0; t < results.size(); ++t) {
        std::vector<double> errors;
        for (const auto& [features, targets] : test_blocks) {
            const auto predictions = nn::forward(results[t].global_params, features).first;
            const auto block_errors = metrics::prediction_errors(predictions, targets);
            errors.insert(errors.end(), block_errors.begin(), block_errors.end());
        }
        stats.push_back(metrics::provisioning_decomposition(errors));
        if (t == 0) {
            dump.first_round = errors;
        }
        if (t + 1 == results.size()) {
            dump.final_round = std::move(errors);
        }
    }

    const bool is_flmr = cfg.fed.loss_kind == fed::LossKind::kFlmr;
    const std::string label = cfg.label.empty() ? (is_flmr ? "flmr" : "deepcog") : cfg.label;
    metrics::emit_reports(results, stats, dump, cfg.fed.loss_kind, label, cfg.out_dir);

    RunArtifacts artifacts;
    double final_phi = 0.0;
    for (const auto& cm : results.back().per_client) {
        final_phi += cm.test_phi;
    }
    artifacts.final_test_phi = final_phi / static_cast<double>(results.back().per_client.size());
    artifacts.final_stats = stats.back();
    artifacts.out_dir = cfg.out_dir;
    artifacts.rounds = std::move(results);
    return artifacts;
}

namespace {

// The argument position decides the role; the file itself may carry its
// stats under either key.
metrics::ProvisioningStats read_stats_either(const std::filesystem::path& path,
                                             const std::string& preferred,
                                             const std::string& fallback) {
    try {
        return metrics::read_summary_stats(path, preferred);
    } catch (const SchemaError&) {
        return metrics::read_summary_stats(path, fallback);
    }
}

}  // namespace

metrics::ComparisonReport compare_summaries(const std::filesystem::path& flmr_summary,
                                            const std::filesystem::path& baseline_summary,
                                            const std::filesystem::path& out_dir) {
    if (!std::filesystem::exists(flmr_summary)) {
        throw ConfigError("missing summary " + flmr_summary.string());
    }
    if (!std::filesystem::exists(baseline_summary)) {
        throw ConfigError("missing summary " + baseline_summary.string());
    }
    const auto flmr_stats = read_stats_either(flmr_summary, "flmr", "baseline");
    const auto baseline_stats = read_stats_either(baseline_summary, "baseline", "flmr");
    const auto report = metrics::compare(flmr_stats, baseline_stats);
    std::filesystem::create_directories(out_dir);
    metrics::write_comparison(report, out_dir / "summary.json");
    return report;
}

}  // namespace flmr::cli
