#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flmr/error.hpp"
#include "flmr/experiment/experiment.hpp"

namespace flmr::cli {

namespace {

struct CliOverrides {
    std::string config_path;
    std::map<std::string, std::string> values;  // config key -> raw value
};

void add_common_options(CLI::App* sub, CliOverrides& overrides) {
    sub->add_option("--config", overrides.config_path, "Configuration file (key = value lines)")
        ->option_text("PATH");

    auto bind = [sub, &overrides](const std::string& flag, const std::string& key,
                                  const std::string& help) {
        sub->add_option_function<std::string>(
               flag, [&overrides, key](const std::string& v) { overrides.values[key] = v; }, help)
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    };

    // Friendly aliases for the common knobs.
    bind("--seed", "fl.seed", "Base seed (unsigned 64-bit)");
    bind("--loss", "fl.loss", "Training loss: flmr or deepcog");
    bind("--workers", "fl.workers", "Parallel client workers (0 = hardware)");
    bind("--rounds", "fl.T", "Number of federation rounds");
    bind("--clients", "fl.K", "Number of clients");
    bind("--local-epochs", "fl.L", "Local epochs per round");
    bind("--alpha", "fuzzy.alpha", "Equality-predicate smoothness constant");
    bind("--p", "fuzzy.p", "Aggregator exponent");

    sub->add_option_function<std::string>(
           "--out",
           [&overrides](const std::string& v) { overrides.values["out.dir"] = v; },
           "Output directory")
        ->envname("FLMR_OUT_DIR")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    // Every configuration key is also a flag of the same name.
    for (const auto& key : config_keys()) {
        bind("--" + key.name, key.name, key.help);
    }
}

ExperimentConfig resolve_config(const CliOverrides& overrides, std::set<std::string>& touched,
                                const std::function<void(ExperimentConfig&)>& presets = {}) {
    ExperimentConfig cfg;
    if (presets) {
        presets(cfg);
    }
    if (!overrides.config_path.empty()) {
        load_config_file(cfg, overrides.config_path, &touched);
    }
    for (const auto& key : config_keys()) {
        const auto it = overrides.values.find(key.name);
        if (it != overrides.values.end()) {
            apply_key(cfg, key.name, it->second, &touched);
        }
    }
    return cfg;
}

void print_run_line(std::ostream& out, const char* tag, const RunArtifacts& artifacts) {
    out << tag << ": final test phi " << artifacts.final_test_phi << ", over_total "
        << artifacts.final_stats.over_total << ", under_total "
        << artifacts.final_stats.under_total << " -> " << artifacts.out_dir.string() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Federated fuzzy-logic CPU load forecasting simulator"};
    app.name("flmr");
    app.require_subcommand(1);

    CliOverrides overrides;

    auto* generate = app.add_subcommand("generate", "Write per-client telemetry CSVs");
    add_common_options(generate, overrides);

    auto* train = app.add_subcommand("train", "Run one federated training experiment");
    add_common_options(train, overrides);

    auto* compare_cmd = app.add_subcommand("compare", "Merge two run summaries into one report");
    std::string flmr_summary;
    std::string baseline_summary;
    compare_cmd->add_option("flmr_summary", flmr_summary, "summary.json of the flmr run")
        ->required();
    compare_cmd->add_option("baseline_summary", baseline_summary, "summary.json of the baseline run")
        ->required();
    compare_cmd->add_option_function<std::string>(
                   "--out",
                   [&overrides](const std::string& v) { overrides.values["out.dir"] = v; },
                   "Output directory")
        ->envname("FLMR_OUT_DIR");

    auto* demo = app.add_subcommand(
        "demo", "Desk-scale preset: flmr run, deepcog run and their comparison");
    add_common_options(demo, overrides);

    std::vector<std::string> argv_storage;
    argv_storage.reserve(args.size() + 1);
    argv_storage.push_back("flmr");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(argv_storage.size());
    for (const auto& a : argv_storage) {
        argv.push_back(a.c_str());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }

    try {
        std::set<std::string> touched;
        if (generate->parsed()) {
            auto cfg = resolve_config(overrides, touched);
            validate(cfg, touched);
            if (cfg.out_dir.empty()) {
                throw ConfigError("no output directory set (use --out, out.dir or FLMR_OUT_DIR)");
            }
            generate_datasets(cfg, cfg.out_dir);
            out << "wrote " << cfg.fed.clients << " client files to " << cfg.out_dir << "\n";
        } else if (train->parsed()) {
            auto cfg = resolve_config(overrides, touched);
            validate(cfg, touched);
            const auto artifacts = run_experiment(cfg);
            print_run_line(out, cfg.fed.loss_kind == fed::LossKind::kFlmr ? "flmr" : "deepcog",
                           artifacts);
        } else if (compare_cmd->parsed()) {
            const auto it = overrides.values.find("out.dir");
            if (it == overrides.values.end() || it->second.empty()) {
                throw ConfigError("no output directory set (use --out or FLMR_OUT_DIR)");
            }
            const auto report = compare_summaries(flmr_summary, baseline_summary, it->second);
            out << "combined_ratio "
                << (std::isinf(report.combined_ratio) ? std::string("inf")
                                                      : std::to_string(report.combined_ratio))
                << " -> " << it->second << "\n";
        } else if (demo->parsed()) {
            auto cfg = resolve_config(overrides, touched, [](ExperimentConfig& c) {
                c.fed.clients = 5;
                c.fed.rounds = 20;
                c.gen.n_records = 2000;
            });
            validate(cfg, touched);
            if (cfg.out_dir.empty()) {
                throw ConfigError("no output directory set (use --out, out.dir or FLMR_OUT_DIR)");
            }
            const std::filesystem::path base_dir = cfg.out_dir;

            auto flmr_cfg = cfg;
            flmr_cfg.fed.loss_kind = fed::LossKind::kFlmr;
            flmr_cfg.out_dir = (base_dir / "flmr").string();
            const auto flmr_run = run_experiment(flmr_cfg);
            print_run_line(out, "flmr", flmr_run);

            auto deepcog_cfg = cfg;
            deepcog_cfg.fed.loss_kind = fed::LossKind::kDeepCog;
            deepcog_cfg.out_dir = (base_dir / "deepcog").string();
            const auto deepcog_run = run_experiment(deepcog_cfg);
            print_run_line(out, "deepcog", deepcog_run);

            const auto report = compare_summaries(base_dir / "flmr" / "summary.json",
                                                  base_dir / "deepcog" / "summary.json", base_dir);
            out << "combined_ratio "
                << (std::isinf(report.combined_ratio) ? std::string("inf")
                                                      : std::to_string(report.combined_ratio))
                << " -> " << (base_dir / "summary.json").string() << "\n";
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace flmr::cli
