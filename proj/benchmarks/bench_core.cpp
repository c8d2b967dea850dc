#include <benchmark/benchmark.h>

#include "flmr/baseline/deepcog.hpp"
#include "flmr/fed/federation.hpp"
#include "flmr/logic/real_logic.hpp"
#include "flmr/nn/adadelta.hpp"
#include "flmr/nn/mlp.hpp"
#include "flmr/rng.hpp"

using namespace flmr;

namespace {

Eigen::MatrixXd random_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = rng.uniform(0.0, 1.0);
        }
    }
    return m;
}

Eigen::VectorXd random_targets(Eigen::Index n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = rng.uniform(0.1, 0.9);
    }
    return v;
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
    const auto batch = state.range(0);
    const auto params = nn::init_params(nn::MlpConfig{}, 1);
    const auto features = random_batch(batch, 5, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(nn::forward(params, features));
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(500)->Arg(2000);

static void BM_ForwardBackward(benchmark::State& state) {
    const auto batch = state.range(0);
    const auto params = nn::init_params(nn::MlpConfig{}, 1);
    const auto features = random_batch(batch, 5, 2);
    const auto targets = random_targets(batch, 3);
    const logic::FuzzyConfig fuzzy;
    for (auto _ : state) {
        const auto [pred, trace] = nn::forward(params, features);
        const auto [report, dpred] = logic::loss_and_grad(pred, targets, fuzzy);
        benchmark::DoNotOptimize(nn::backward(params, trace, dpred));
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(500);

static void BM_LossAndGrad(benchmark::State& state) {
    const auto n = state.range(0);
    const auto pred = random_targets(n, 4);
    const auto targets = random_targets(n, 5);
    const logic::FuzzyConfig fuzzy;
    for (auto _ : state) {
        benchmark::DoNotOptimize(logic::loss_and_grad(pred, targets, fuzzy));
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_LossAndGrad)->Arg(500)->Arg(5000);

static void BM_DeepCogLossAndGrad(benchmark::State& state) {
    const auto n = state.range(0);
    const auto pred = random_targets(n, 6);
    const auto targets = random_targets(n, 7);
    const baseline::DeepCogLossConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(baseline::deepcog_loss_and_grad(pred, targets, cfg));
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_DeepCogLossAndGrad)->Arg(500);

static void BM_AdaDeltaStep(benchmark::State& state) {
    const auto params = nn::init_params(nn::MlpConfig{}, 1);
    auto st = nn::make_adadelta_state(params);
    nn::ParamGrads grads;
    for (const auto& layer : params.layers) {
        grads.layers.push_back({Eigen::MatrixXd::Constant(layer.w.rows(), layer.w.cols(), 1e-3),
                                Eigen::VectorXd::Constant(layer.b.size(), 1e-3)});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(nn::adadelta_step(params, grads, st));
    }
}
BENCHMARK(BM_AdaDeltaStep);

static void BM_FedAvg(benchmark::State& state) {
    const auto clients = state.range(0);
    std::vector<fed::WeightedUpdate> updates;
    for (int k = 0; k < clients; ++k) {
        updates.push_back({k, nn::init_params(nn::MlpConfig{}, static_cast<std::uint64_t>(k)),
                           500});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(fed::fedavg(updates));
    }
}
BENCHMARK(BM_FedAvg)->Arg(5)->Arg(50);

BENCHMARK_MAIN();
