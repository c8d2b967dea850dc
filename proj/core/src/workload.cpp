#include "flmr/data/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>

#include "flmr/error.hpp"
#include "flmr/rng.hpp"

namespace flmr::data {

namespace {

constexpr std::array<std::string_view, 7> kColumns = {
    "mcs_dl", "mcs_ul", "dl_kbps", "ul_kbps", "cpu_set", "cpu", "explode"};

std::string format_double(double v) {
    std::array<char, 32> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

double parse_double(const std::string& cell, std::size_t row, std::string_view column) {
    double value = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
        throw ParseError("row " + std::to_string(row) + ", column \"" + std::string(column) +
                         "\": cannot parse \"" + cell + "\"");
    }
    return value;
}

int parse_int(const std::string& cell, std::size_t row, std::string_view column) {
    int value = 0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
        throw ParseError("row " + std::to_string(row) + ", column \"" + std::string(column) +
                         "\": cannot parse \"" + cell + "\"");
    }
    return value;
}

void validate_record(const VbsRecord& r, std::size_t row) {
    if (r.mcs_dl < 0 || r.mcs_dl > kMcsMax) {
        throw ValidationError("row " + std::to_string(row) + ": mcs_dl = " +
                              std::to_string(r.mcs_dl) + " outside [0, 28]");
    }
    if (r.mcs_ul < 0 || r.mcs_ul > kMcsMax) {
        throw ValidationError("row " + std::to_string(row) + ": mcs_ul = " +
                              std::to_string(r.mcs_ul) + " outside [0, 28]");
    }
    if (r.dl_kbps < 0.0 || r.ul_kbps < 0.0) {
        throw ValidationError("row " + std::to_string(row) + ": traffic must be non-negative");
    }
    if (r.cpu_set < 0) {
        throw ValidationError("row " + std::to_string(row) + ": cpu_set must be non-negative");
    }
    if (!(r.cpu >= 0.0 && r.cpu <= 1.0)) {
        throw ValidationError("row " + std::to_string(row) + ": cpu = " + format_double(r.cpu) +
                              " outside [0, 1]");
    }
}

double feature_value(const VbsRecord& r, int feature) {
    switch (feature) {
        case 0: return static_cast<double>(r.mcs_dl);
        case 1: return static_cast<double>(r.mcs_ul);
        case 2: return r.dl_kbps;
        case 3: return r.ul_kbps;
        default: return static_cast<double>(r.cpu_set);
    }
}

}  // namespace

void validate(const GeneratorConfig& cfg) {
    if (cfg.n_records == 0) {
        throw ConfigError("GeneratorConfig: n_records must be positive");
    }
    if (!(cfg.ul_max_kbps > 0.0) || !(cfg.dl_max_kbps > 0.0)) {
        throw ConfigError("GeneratorConfig: traffic maxima must be positive");
    }
    if (cfg.cpu_set_count < 1) {
        throw ConfigError("GeneratorConfig: cpu_set_count must be >= 1");
    }
    if (cfg.noise_sd < 0.0) {
        throw ConfigError("GeneratorConfig: noise_sd must be non-negative");
    }
    if (!(cfg.explode_threshold > 0.0 && cfg.explode_threshold <= 1.0)) {
        throw ConfigError("GeneratorConfig: explode_threshold must lie in (0, 1]");
    }
}

double raw_cpu_load(const GeneratorConfig& cfg, double ul_kbps, double dl_kbps, int mcs_ul,
                    int mcs_dl, int cpu_set, double noise) {
    const double mcs_max = static_cast<double>(kMcsMax);
    const double ul_term = cfg.ul_weight * (ul_kbps / cfg.ul_max_kbps) *
                           (1.0 + cfg.mcs_ul_factor * (mcs_max - mcs_ul) / mcs_max);
    const double dl_term = cfg.dl_weight * (dl_kbps / cfg.dl_max_kbps) *
                           (1.0 + cfg.mcs_dl_factor * (mcs_max - mcs_dl) / mcs_max);
    return cfg.base_load + ul_term + dl_term + cfg.cpu_set_offset_step * cpu_set + noise;
}

std::vector<VbsRecord> generate_synthetic(const GeneratorConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);
    std::vector<VbsRecord> records;
    records.reserve(cfg.n_records);
    for (std::size_t i = 0; i < cfg.n_records; ++i) {
        VbsRecord r;
        r.ul_kbps = rng.uniform(0.0, cfg.ul_max_kbps);
        r.dl_kbps = rng.uniform(0.0, cfg.dl_max_kbps);
        r.mcs_ul = rng.uniform_int(0, kMcsMax);
        r.mcs_dl = rng.uniform_int(0, kMcsMax);
        r.cpu_set = rng.uniform_int(0, cfg.cpu_set_count - 1);
        const double noise = rng.normal(0.0, cfg.noise_sd);
        const double raw = raw_cpu_load(cfg, r.ul_kbps, r.dl_kbps, r.mcs_ul, r.mcs_dl,
                                        r.cpu_set, noise);
        r.explode = raw > cfg.explode_threshold;
        r.cpu = std::clamp(raw, 0.0, 1.0);
        records.push_back(r);
    }
    return records;
}

std::vector<VbsRecord> load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw SchemaError(path.string() + ": missing header row");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    const auto header = split_line(line);

    std::array<std::size_t, kColumns.size()> index{};
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
        const auto it = std::find(header.begin(), header.end(), std::string(kColumns[c]));
        if (it == header.end()) {
            throw SchemaError(path.string() + ": missing column \"" + std::string(kColumns[c]) +
                              "\"");
        }
        index[c] = static_cast<std::size_t>(it - header.begin());
    }

    std::vector<VbsRecord> records;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        ++row;
        const auto cells = split_line(line);
        if (cells.size() < header.size()) {
            throw ParseError("row " + std::to_string(row) + ": expected " +
                             std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
        }
        VbsRecord r;
        r.mcs_dl = parse_int(cells[index[0]], row, kColumns[0]);
        r.mcs_ul = parse_int(cells[index[1]], row, kColumns[1]);
        r.dl_kbps = parse_double(cells[index[2]], row, kColumns[2]);
        r.ul_kbps = parse_double(cells[index[3]], row, kColumns[3]);
        r.cpu_set = parse_int(cells[index[4]], row, kColumns[4]);
        r.cpu = parse_double(cells[index[5]], row, kColumns[5]);
        const int explode = parse_int(cells[index[6]], row, kColumns[6]);
        if (explode != 0 && explode != 1) {
            throw ValidationError("row " + std::to_string(row) + ": explode must be 0 or 1, got " +
                                  std::to_string(explode));
        }
        r.explode = explode == 1;
        validate_record(r, row);
        records.push_back(r);
    }
    return records;
}

void write_csv(const std::filesystem::path& path, std::span<const VbsRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << "mcs_dl,mcs_ul,dl_kbps,ul_kbps,cpu_set,cpu,explode\n";
    for (const auto& r : records) {
        out << r.mcs_dl << ',' << r.mcs_ul << ',' << format_double(r.dl_kbps) << ','
            << format_double(r.ul_kbps) << ',' << r.cpu_set << ',' << format_double(r.cpu) << ','
            << (r.explode ? '1' : '0') << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::vector<VbsRecord> filter_exploded(std::span<const VbsRecord> records) {
    std::vector<VbsRecord> kept;
    kept.reserve(records.size());
    for (const auto& r : records) {
        if (!r.explode) {
            kept.push_back(r);
        }
    }
    return kept;
}

FeatureStats fit_normalizer(std::span<const VbsRecord> records) {
    if (records.empty()) {
        throw UsageError("fit_normalizer: empty record list");
    }
    FeatureStats stats;
    stats.min_max[0] = {0.0, static_cast<double>(kMcsMax)};
    stats.min_max[1] = {0.0, static_cast<double>(kMcsMax)};
    for (int f = 2; f < kFeatureCount; ++f) {
        double lo = feature_value(records[0], f);
        double hi = lo;
        for (const auto& r : records) {
            const double v = feature_value(r, f);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        stats.min_max[static_cast<std::size_t>(f)] = {lo, hi};
    }
    return stats;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> normalize(std::span<const VbsRecord> records,
                                                      const FeatureStats& stats) {
    Eigen::MatrixXd features(static_cast<Eigen::Index>(records.size()), kFeatureCount);
    Eigen::VectorXd targets(static_cast<Eigen::Index>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (int f = 0; f < kFeatureCount; ++f) {
            const auto [lo, hi] = stats.min_max[static_cast<std::size_t>(f)];
            const double v = feature_value(records[i], f);
            features(static_cast<Eigen::Index>(i), f) = (hi > lo) ? (v - lo) / (hi - lo) : 0.0;
        }
        targets[static_cast<Eigen::Index>(i)] = records[i].cpu;
    }
    return {std::move(features), std::move(targets)};
}

std::pair<std::vector<VbsRecord>, std::vector<VbsRecord>> split(std::span<const VbsRecord> records,
                                                                double test_fraction,
                                                                std::uint64_t seed) {
    if (records.size() < 2) {
        throw UsageError("split: need at least two records");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw UsageError("split: test_fraction must lie in (0, 1)");
    }
    const auto n = records.size();
    // Round-half-to-even via the default FE_TONEAREST mode.
    auto n_test = static_cast<std::size_t>(
        std::llrint(test_fraction * static_cast<double>(n)));
    n_test = std::min(n_test, n - 1);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    deterministic_shuffle(order, rng);

    std::vector<VbsRecord> test;
    std::vector<VbsRecord> train;
    test.reserve(n_test);
    train.reserve(n - n_test);
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_test) {
            test.push_back(records[order[i]]);
        } else {
            train.push_back(records[order[i]]);
        }
    }
    return {std::move(train), std::move(test)};
}

ClientDataset make_client_dataset(int client_id, std::span<const VbsRecord> records,
                                  double test_fraction, std::uint64_t seed) {
    auto [train, test] = split(records, test_fraction, seed);
    if (train.empty() || test.empty()) {
        throw UsageError("make_client_dataset: split left an empty train or test block for client " +
                         std::to_string(client_id));
    }
    ClientDataset dataset;
    dataset.client_id = client_id;
    dataset.train_count = train.size();
    dataset.records = std::move(train);
    dataset.records.insert(dataset.records.end(), test.begin(), test.end());
    dataset.feature_stats = fit_normalizer(dataset.train_records());
    return dataset;
}

}  // namespace flmr::data
