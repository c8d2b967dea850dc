#include <doctest.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flmr/error.hpp"
#include "flmr/fed/federation.hpp"
#include "flmr/metrics/report.hpp"
#include "flmr/rng.hpp"
#include "test_helpers.hpp"

using namespace flmr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const auto dir = fs::temp_directory_path() / "flmr_metrics_tests" / name;
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

double parse_cell(const std::string& cell) {
    double v = 0.0;
    std::from_chars(cell.data(), cell.data() + cell.size(), v);
    return v;
}

// A tiny fabricated two-round run for the emit tests.
std::pair<std::vector<fed::RoundResult>, std::vector<metrics::ProvisioningStats>> fake_run() {
    std::vector<fed::RoundResult> results(2);
    for (int t = 0; t < 2; ++t) {
        results[static_cast<std::size_t>(t)].round = t;
        for (int k = 0; k < 3; ++k) {
            fed::ClientMetrics cm;
            cm.client_id = k;
            cm.train_phi = 0.9 + 0.01 * t + 0.001 * k;
            cm.train_loss = 1.0 - cm.train_phi;
            cm.test_phi = 0.91 + 0.01 * t + 0.002 * k;
            cm.test_loss = 1.0 - cm.test_phi;
            results[static_cast<std::size_t>(t)].per_client.push_back(cm);
        }
    }
    std::vector<metrics::ProvisioningStats> stats(2);
    stats[0] = metrics::provisioning_decomposition(std::vector<double>{0.1, -0.2, 0.05});
    stats[1] = metrics::provisioning_decomposition(std::vector<double>{0.04, -0.01, 0.0});
    return {std::move(results), std::move(stats)};
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("prediction_errors is the signed difference") {
    Eigen::VectorXd pred(2);
    Eigen::VectorXd target(2);
    pred << 0.3, 0.9;
    target << 0.4, 0.6;
    const auto errors = metrics::prediction_errors(pred, target);
    CHECK(errors[0] == doctest::Approx(-0.1).epsilon(1e-14));
    CHECK(errors[1] == doctest::Approx(0.3).epsilon(1e-14));

    Eigen::VectorXd same(1);
    same << 0.7;
    CHECK(metrics::prediction_errors(same, same)[0] == 0.0);

    Eigen::VectorXd shorter(1);
    CHECK_THROWS_AS(metrics::prediction_errors(pred, shorter), ShapeError);
}

TEST_CASE("provisioning decomposition splits signs and skips zeros") {
    const std::vector<double> errors{0.2, -0.1, 0.05};
    const auto stats = metrics::provisioning_decomposition(errors);
    CHECK(stats.over_total == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(stats.under_total == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(stats.over_count == 2);
    CHECK(stats.under_count == 1);
    CHECK(stats.sample_count == 3);

    const auto zeros = metrics::provisioning_decomposition(std::vector<double>{0.0, 0.0});
    CHECK(zeros.over_total == 0.0);
    CHECK(zeros.under_total == 0.0);
    CHECK(zeros.over_count == 0);
    CHECK(zeros.under_count == 0);
    CHECK(zeros.sample_count == 2);

    const auto single = metrics::provisioning_decomposition(std::vector<double>{-0.4});
    CHECK(single.over_total == 0.0);
    CHECK(single.under_total == doctest::Approx(0.4).epsilon(1e-14));

    CHECK_THROWS_AS(metrics::provisioning_decomposition(std::vector<double>{}), UsageError);
}

TEST_CASE("over minus under equals the plain sum of errors") {
    Rng rng(20);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> errors(static_cast<std::size_t>(rng.uniform_int(1, 200)));
        double sum = 0.0;
        for (auto& e : errors) {
            e = rng.uniform(-0.5, 0.5);
            sum += e;
        }
        const auto stats = metrics::provisioning_decomposition(errors);
        CHECK(std::abs(stats.over_total - stats.under_total - sum) < 1e-9);
        CHECK(stats.over_count + stats.under_count <= stats.sample_count);
    }
}

TEST_CASE("the decomposition is scale-equivariant") {
    Rng rng(21);
    std::vector<double> errors(64);
    for (auto& e : errors) {
        e = rng.uniform(-1.0, 1.0);
    }
    const double c = 3.75;
    auto scaled = errors;
    for (auto& e : scaled) {
        e *= c;
    }
    const auto base = metrics::provisioning_decomposition(errors);
    const auto big = metrics::provisioning_decomposition(scaled);
    CHECK(big.over_total == doctest::Approx(c * base.over_total).epsilon(1e-12));
    CHECK(big.under_total == doctest::Approx(c * base.under_total).epsilon(1e-12));
    CHECK(big.over_count == base.over_count);
    CHECK(big.under_count == base.under_count);
}

TEST_CASE("compare forms baseline-over-flmr ratios") {
    metrics::ProvisioningStats a;
    a.over_total = 2.0;
    a.under_total = 1.0;
    a.sample_count = 10;
    const auto equal = metrics::compare(a, a);
    CHECK(equal.over_ratio == 1.0);
    CHECK(equal.under_ratio == 1.0);
    CHECK(equal.combined_ratio == 1.0);

    metrics::ProvisioningStats b = a;
    b.over_total = 12.0;
    b.under_total = 6.0;
    const auto six = metrics::compare(a, b);
    CHECK(six.combined_ratio == doctest::Approx(6.0).epsilon(1e-14));

    metrics::ProvisioningStats zero;
    zero.under_total = 1.0;
    zero.sample_count = 10;
    const auto inf = metrics::compare(zero, a);
    CHECK(std::isinf(inf.over_ratio));
}

TEST_CASE("emit_reports writes the documented file set deterministically") {
    auto [results, stats] = fake_run();
    metrics::ErrorDump dump;
    dump.first_round = {0.1, -0.2, 0.05};
    dump.final_round = {0.04, -0.01, 0.0};

    const auto dir_a = temp_dir("emit_a");
    metrics::emit_reports(results, stats, dump, fed::LossKind::kFlmr, "unit", dir_a);
    for (const char* name : {"rounds.csv", "errors_round0.csv", "errors_final.csv", "summary.json"}) {
        CHECK(fs::exists(dir_a / name));
    }

    const std::string rounds = slurp(dir_a / "rounds.csv");
    CHECK(rounds.starts_with("round,train_loss,train_phi,test_loss,test_phi\n"));
    CHECK(std::count(rounds.begin(), rounds.end(), '\n') == 3);  // header + 2 rounds

    const auto dir_b = temp_dir("emit_b");
    metrics::emit_reports(results, stats, dump, fed::LossKind::kFlmr, "unit", dir_b);
    for (const char* name : {"rounds.csv", "errors_round0.csv", "errors_final.csv", "summary.json"}) {
        CHECK(slurp(dir_a / name) == slurp(dir_b / name));
    }
}

TEST_CASE("rounds.csv keeps the loss identity bit-exact for fuzzy runs") {
    auto [results, stats] = fake_run();
    metrics::ErrorDump dump;
    dump.first_round = {0.1};
    dump.final_round = {0.1};
    const auto dir = temp_dir("emit_identity");
    metrics::emit_reports(results, stats, dump, fed::LossKind::kFlmr, "unit", dir);

    std::ifstream in(dir / "rounds.csv");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        REQUIRE(cells.size() == 5);
        CHECK(parse_cell(cells[1]) == 1.0 - parse_cell(cells[2]));
        CHECK(parse_cell(cells[3]) == 1.0 - parse_cell(cells[4]));
    }
}

TEST_CASE("error dumps are capped at the documented sample count") {
    auto [results, stats] = fake_run();
    metrics::ErrorDump dump;
    dump.first_round.assign(250, 0.25);
    dump.final_round.assign(40, -0.5);
    const auto dir = temp_dir("emit_cap");
    metrics::emit_reports(results, stats, dump, fed::LossKind::kFlmr, "unit", dir);
    const auto first = slurp(dir / "errors_round0.csv");
    const auto last = slurp(dir / "errors_final.csv");
    CHECK(std::count(first.begin(), first.end(), '\n') ==
          static_cast<long>(metrics::kErrorDumpSamples) + 1);
    CHECK(std::count(last.begin(), last.end(), '\n') == 41);
    CHECK(first.starts_with("sample_index,p_err\n"));
}

TEST_CASE("summary stats survive the json round trip") {
    auto [results, stats] = fake_run();
    metrics::ErrorDump dump;
    dump.first_round = {0.1};
    dump.final_round = {0.1};
    const auto dir = temp_dir("emit_json");
    metrics::emit_reports(results, stats, dump, fed::LossKind::kDeepCog, "base", dir);

    const auto read = metrics::read_summary_stats(dir / "summary.json", "baseline");
    CHECK(read.over_total == stats[1].over_total);
    CHECK(read.under_total == stats[1].under_total);
    CHECK(read.over_count == stats[1].over_count);
    CHECK(read.sample_count == stats[1].sample_count);

    CHECK_THROWS_AS(metrics::read_summary_stats(dir / "summary.json", "flmr"), SchemaError);
    CHECK_THROWS_AS(metrics::read_summary_stats(dir / "nope.json", "flmr"), IoError);
}

TEST_CASE("write_comparison encodes infinite ratios as the string inf") {
    metrics::ProvisioningStats zero;
    zero.sample_count = 5;
    metrics::ProvisioningStats some;
    some.over_total = 1.0;
    some.under_total = 2.0;
    some.sample_count = 5;
    const auto report = metrics::compare(zero, some);
    const auto dir = temp_dir("cmp_inf");
    metrics::write_comparison(report, dir / "summary.json");
    const auto text = slurp(dir / "summary.json");
    CHECK(text.find("\"combined_ratio\": \"inf\"") != std::string::npos);
    CHECK(text.find("\"ratios\"") != std::string::npos);
}

}  // TEST_SUITE("metrics")
