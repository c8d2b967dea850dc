#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flmr/error.hpp"
#include "flmr/experiment/experiment.hpp"

using namespace flmr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const auto dir = fs::temp_directory_path() / "flmr_experiment_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small enough to keep the whole suite fast.
cli::ExperimentConfig tiny_config() {
    cli::ExperimentConfig cfg;
    cfg.fed.clients = 2;
    cfg.fed.rounds = 2;
    cfg.fed.batch_size = 32;
    cfg.fed.mlp = nn::MlpConfig{5, {8, 6}};
    cfg.gen.n_records = 120;
    return cfg;
}

int run(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run_cli(args, out, err);
    if (out_text != nullptr) {
        *out_text = out.str();
    }
    if (err_text != nullptr) {
        *err_text = err.str();
    }
    return code;
}

bool trees_equal(const fs::path& a, const fs::path& b) {
    std::set<fs::path> rel_a;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (entry.is_regular_file()) {
            rel_a.insert(fs::relative(entry.path(), a));
        }
    }
    std::set<fs::path> rel_b;
    for (const auto& entry : fs::recursive_directory_iterator(b)) {
        if (entry.is_regular_file()) {
            rel_b.insert(fs::relative(entry.path(), b));
        }
    }
    if (rel_a != rel_b) {
        return false;
    }
    for (const auto& rel : rel_a) {
        if (slurp(a / rel) != slurp(b / rel)) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("config files accept comments, blanks and dotted keys") {
    const auto dir = temp_dir("config_parse");
    const auto path = dir / "exp.conf";
    std::ofstream(path) << "# desk-scale preset\n"
                           "fl.K = 5\n"
                           "\n"
                           "fl.T=20   # inline comment\n"
                           "fuzzy.alpha = 0.5\n"
                           "fl.loss = deepcog\n"
                           "fl.drop_exploded = false\n";
    cli::ExperimentConfig cfg;
    std::set<std::string> touched;
    cli::load_config_file(cfg, path, &touched);
    CHECK(cfg.fed.clients == 5);
    CHECK(cfg.fed.rounds == 20);
    CHECK(cfg.fed.fuzzy.alpha == 0.5);
    CHECK(cfg.fed.loss_kind == fed::LossKind::kDeepCog);
    CHECK_FALSE(cfg.drop_exploded);
    CHECK(touched.count("fl.K") == 1);
    CHECK(touched.count("fl.T") == 1);
}

TEST_CASE("unknown keys and bad values are configuration errors") {
    cli::ExperimentConfig cfg;
    CHECK_THROWS_AS(cli::apply_key(cfg, "fl.bogus", "1"), ConfigError);
    try {
        cli::apply_key(cfg, "fl.K", "five");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("fl.K") != std::string::npos);
    }

    const auto dir = temp_dir("config_bad");
    const auto path = dir / "bad.conf";
    std::ofstream(path) << "fl.K\n";
    CHECK_THROWS_AS(cli::load_config_file(cfg, path), ConfigError);
}

TEST_CASE("a dataset directory excludes explicit generator settings") {
    cli::ExperimentConfig cfg = tiny_config();
    cfg.data_dir = "/some/dir";
    std::set<std::string> touched{"data.dir", "gen.noise_sd"};
    CHECK_THROWS_AS(cli::validate(cfg, touched), ConfigError);
    std::set<std::string> fine{"data.dir", "fl.K"};
    CHECK_NOTHROW(cli::validate(cfg, fine));
}

TEST_CASE("generate_datasets writes one deterministic file per client") {
    auto cfg = tiny_config();
    cfg.fed.clients = 3;
    const auto dir_a = temp_dir("gen_a");
    cli::generate_datasets(cfg, dir_a);
    for (int k = 0; k < 3; ++k) {
        CHECK(fs::exists(dir_a / ("client_" + std::to_string(k) + ".csv")));
    }
    const auto dir_b = temp_dir("gen_b");
    cli::generate_datasets(cfg, dir_b);
    CHECK(trees_equal(dir_a, dir_b));

    auto zero = cfg;
    zero.fed.clients = 0;
    CHECK_THROWS_AS(cli::generate_datasets(zero, temp_dir("gen_zero")), ConfigError);
}

TEST_CASE("csv-backed runs see exactly the generated data") {
    auto cfg = tiny_config();
    const auto dir = temp_dir("gen_load");
    cli::generate_datasets(cfg, dir);

    auto from_csv = cfg;
    from_csv.data_dir = dir.string();
    const auto synthetic = cli::build_datasets(cfg);
    const auto loaded = cli::build_datasets(from_csv);
    REQUIRE(synthetic.size() == loaded.size());
    for (std::size_t k = 0; k < synthetic.size(); ++k) {
        CHECK(synthetic[k].records == loaded[k].records);
        CHECK(synthetic[k].train_count == loaded[k].train_count);
    }
}

TEST_CASE("build_datasets reports the missing client file") {
    auto cfg = tiny_config();
    cfg.data_dir = temp_dir("missing_dir").string();
    try {
        cli::build_datasets(cfg);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("client_0.csv") != std::string::npos);
    }
}

TEST_CASE("run_experiment writes a deterministic output tree") {
    auto cfg = tiny_config();
    const auto dir_a = temp_dir("run_a");
    cfg.out_dir = dir_a.string();
    const auto artifacts = cli::run_experiment(cfg);
    CHECK(artifacts.rounds.size() == 2);
    for (const char* name : {"rounds.csv", "errors_round0.csv", "errors_final.csv", "summary.json"}) {
        CHECK(fs::exists(dir_a / name));
    }

    const auto dir_b = temp_dir("run_b");
    cfg.out_dir = dir_b.string();
    cli::run_experiment(cfg);
    CHECK(trees_equal(dir_a, dir_b));

    // Worker count must not leak into any output byte.
    auto cfg_mt = cfg;
    cfg_mt.workers = 4;
    const auto dir_c = temp_dir("run_c");
    cfg_mt.out_dir = dir_c.string();
    cli::run_experiment(cfg_mt);
    CHECK(trees_equal(dir_a, dir_c));

    auto no_out = cfg;
    no_out.out_dir.clear();
    CHECK_THROWS_AS(cli::run_experiment(no_out), ConfigError);
}

TEST_CASE("compare_summaries merges two runs") {
    auto cfg = tiny_config();
    const auto dir_f = temp_dir("cmp_f");
    cfg.out_dir = dir_f.string();
    cli::run_experiment(cfg);

    auto base = cfg;
    base.fed.loss_kind = fed::LossKind::kDeepCog;
    const auto dir_d = temp_dir("cmp_d");
    base.out_dir = dir_d.string();
    cli::run_experiment(base);

    const auto out = temp_dir("cmp_out");
    const auto report =
        cli::compare_summaries(dir_f / "summary.json", dir_d / "summary.json", out);
    CHECK(fs::exists(out / "summary.json"));
    CHECK(report.flmr.sample_count == report.baseline.sample_count);

    const auto self = cli::compare_summaries(dir_f / "summary.json", dir_f / "summary.json",
                                             temp_dir("cmp_self"));
    CHECK(self.combined_ratio == 1.0);

    CHECK_THROWS_AS(
        cli::compare_summaries(dir_f / "nope.json", dir_d / "summary.json", out), ConfigError);
}

TEST_CASE("compare_summaries rejects a summary without any stats block") {
    const auto dir = temp_dir("cmp_no_stats");
    const auto path = dir / "summary.json";
    std::ofstream(path) << "{\"label\": \"x\"}\n";
    CHECK_THROWS_AS(cli::compare_summaries(path, path, temp_dir("cmp_no_stats_out")), SchemaError);
}

TEST_CASE("cli happy path: generate, train, compare, demo") {
    const auto data_dir = temp_dir("cli_data");
    CHECK(run({"generate", "--clients", "2", "--gen.n_records", "120", "--out",
               data_dir.string()}) == 0);
    CHECK(fs::exists(data_dir / "client_1.csv"));

    const auto train_dir = temp_dir("cli_train");
    CHECK(run({"train", "--clients", "2", "--rounds", "2", "--fl.batch_size", "32",
               "--gen.n_records", "120", "--mlp.hidden1", "8", "--mlp.hidden2", "6", "--out",
               train_dir.string()}) == 0);
    CHECK(fs::exists(train_dir / "summary.json"));

    const auto deep_dir = temp_dir("cli_deep");
    CHECK(run({"train", "--clients", "2", "--rounds", "2", "--fl.batch_size", "32",
               "--gen.n_records", "120", "--mlp.hidden1", "8", "--mlp.hidden2", "6", "--loss",
               "deepcog", "--out", deep_dir.string()}) == 0);
    const auto deep_summary = slurp(deep_dir / "summary.json");
    CHECK(deep_summary.find("\"baseline\"") != std::string::npos);

    const auto cmp_dir = temp_dir("cli_cmp");
    std::string out_text;
    CHECK(run({"compare", (train_dir / "summary.json").string(),
               (deep_dir / "summary.json").string(), "--out", cmp_dir.string()},
              &out_text) == 0);
    CHECK(out_text.find("combined_ratio") != std::string::npos);
}

TEST_CASE("cli exit codes follow the error classes") {
    std::string err_text;
    // No output directory anywhere.
    CHECK(run({"train", "--clients", "2", "--rounds", "1", "--gen.n_records", "120"}, nullptr,
              &err_text) == 1);
    CHECK(err_text.find("output directory") != std::string::npos);

    // Missing data directory.
    CHECK(run({"train", "--data.dir", "/nonexistent_dir_12345", "--clients", "2", "--out",
               temp_dir("cli_err").string()},
              nullptr, &err_text) == 1);

    // Unknown flag.
    CHECK(run({"train", "--no-such-flag", "1"}, nullptr, &err_text) == 1);

    // Bad flag value.
    CHECK(run({"train", "--rounds", "zero", "--out", temp_dir("cli_err2").string()}, nullptr,
              &err_text) == 1);

    // Missing subcommand.
    CHECK(run({}) == 1);

    // Help exits 0 and lists every configuration key.
    std::string help_text;
    CHECK(run({"train", "--help"}, &help_text) == 0);
    for (const auto& key : cli::config_keys()) {
        CHECK_MESSAGE(help_text.find("--" + key.name) != std::string::npos,
                      "missing flag --" << key.name);
    }
}

TEST_CASE("defaults carry the published experiment settings") {
    const cli::ExperimentConfig cfg;
    CHECK(cfg.fed.clients == 50);
    CHECK(cfg.fed.rounds == 50);
    CHECK(cfg.fed.batch_size == 500);
    CHECK(cfg.fed.local_epochs == 1);
    CHECK(cfg.fed.optimizer.rho == 0.85);
    CHECK(cfg.fed.optimizer.epsilon == 1e-6);
    CHECK(cfg.fed.optimizer.step_scale == 1.0);
    CHECK(cfg.fed.fuzzy.alpha == 0.5);
    CHECK(cfg.fed.fuzzy.p == 2.0);
    CHECK(cfg.fed.mlp.input_dim == 5);
    CHECK(cfg.fed.mlp.hidden_dims == std::array<int, 2>{64, 32});
    CHECK(cfg.fed.mlp.output_dim == 1);
    CHECK(cfg.test_fraction == 0.2);
    CHECK(cfg.drop_exploded);
}

TEST_CASE("FLMR_OUT_DIR supplies the output directory when --out is absent") {
    const auto dir = temp_dir("cli_env");
    setenv("FLMR_OUT_DIR", (dir / "from_env").string().c_str(), 1);
    const int code = run({"generate", "--clients", "1", "--gen.n_records", "40"});
    unsetenv("FLMR_OUT_DIR");
    CHECK(code == 0);
    CHECK(fs::exists(dir / "from_env" / "client_0.csv"));
}

TEST_CASE("config file plus flag overrides, flags win") {
    const auto dir = temp_dir("cli_file");
    const auto conf = dir / "exp.conf";
    std::ofstream(conf) << "fl.K = 2\nfl.T = 2\nfl.batch_size = 32\n"
                           "gen.n_records = 120\nmlp.hidden1 = 8\nmlp.hidden2 = 6\n"
                           "out.dir = " << (dir / "out").string() << "\n";
    std::string out_text;
    CHECK(run({"train", "--config", conf.string(), "--rounds", "3"}, &out_text) == 0);
    const auto rounds = slurp(dir / "out" / "rounds.csv");
    CHECK(std::count(rounds.begin(), rounds.end(), '\n') == 4);  // header + 3 rounds
}

TEST_CASE("the demo preset runs both losses and the comparison") {
    const auto dir = temp_dir("cli_demo");
    std::string out_text;
    // Shrink the preset so the unit suite stays fast; the acceptance suite
    // runs it at full desk scale.
    CHECK(run({"demo", "--out", dir.string(), "--gen.n_records", "160", "--rounds", "2",
               "--fl.batch_size", "64", "--mlp.hidden1", "8", "--mlp.hidden2", "6"},
              &out_text) == 0);
    CHECK(fs::exists(dir / "flmr" / "rounds.csv"));
    CHECK(fs::exists(dir / "deepcog" / "rounds.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(out_text.find("combined_ratio") != std::string::npos);
}

}  // TEST_SUITE("experiment")
