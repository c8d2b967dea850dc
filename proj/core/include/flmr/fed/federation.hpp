#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flmr/baseline/deepcog.hpp"
#include "flmr/data/workload.hpp"
#include "flmr/logic/real_logic.hpp"
#include "flmr/nn/adadelta.hpp"
#include "flmr/nn/mlp.hpp"

namespace flmr::fed {

enum class LossKind { kFlmr, kDeepCog };

struct OptimizerConfig {
    double rho = 0.85;
    double epsilon = 1e-6;
    double step_scale = 1.0;
};

/// Federation hyperparameters. `participants = 0` means every client joins
/// every round (the default aggregation over all K).
struct FedConfig {
    int clients = 50;       // K
    int rounds = 50;        // T
    int local_epochs = 1;   // L
    int batch_size = 500;   // local mini-batch size
    int participants = 0;   // m clients aggregated per round; 0 = all
    OptimizerConfig optimizer;
    logic::FuzzyConfig fuzzy;
    baseline::DeepCogLossConfig deepcog;
    nn::MlpConfig mlp;
    LossKind loss_kind = LossKind::kFlmr;
    std::uint64_t seed = 42;
};

void validate(const FedConfig& cfg);

/// One client's slice of a round: training metrics from the final local
/// epoch and test metrics of the freshly aggregated global model on the
/// client's held-out block. For fuzzy-loss runs each loss is stored as
/// exactly 1 - phi.
struct ClientMetrics {
    int client_id = 0;
    double train_loss = 0.0;
    double train_phi = 0.0;
    double test_loss = 0.0;
    double test_phi = 0.0;
};

struct RoundResult {
    int round = 0;
    nn::ModelParams global_params;
    std::vector<ClientMetrics> per_client;  // ascending client_id, K entries
    double wall_time_s = 0.0;
};

/// Everything one worker owns while training a client: the raw dataset, the
/// normalized matrices derived from it, the local model and optimizer state.
struct ClientState {
    int client_id = 0;
    data::ClientDataset dataset;
    nn::ModelParams params;
    nn::AdaDeltaState opt_state;
    Eigen::MatrixXd train_features;
    Eigen::VectorXd train_targets;
    Eigen::MatrixXd test_features;
    Eigen::VectorXd test_targets;
};

ClientState make_client_state(data::ClientDataset dataset, const FedConfig& cfg);

struct LocalMetrics {
    double train_loss = 0.0;
    double train_phi = 0.0;
};

/// Adopts the broadcast parameters, then runs `local_epochs` passes of
/// mini-batch training with the configured loss. The shuffling stream is
/// derived from (seed, client_id, round), so results do not depend on which
/// worker executes the call.
LocalMetrics local_train(ClientState& client, const nn::ModelParams& global_params,
                         const FedConfig& cfg, int round);

struct WeightedUpdate {
    int client_id = 0;
    nn::ModelParams params;
    std::size_t sample_count = 0;
};

/// Sample-count-weighted average sum_k (D_k / D) W_k, summed in ascending
/// client_id order. Throws AggregationError naming the first client whose
/// shapes disagree.
nn::ModelParams fedavg(std::span<const WeightedUpdate> updates);

/// The full loop: initialize the global model from cfg.seed, then for each
/// round train all clients (in parallel over `workers` threads; 0 means one
/// per hardware thread), aggregate, broadcast, and evaluate the new global
/// model on every client's test block. Identical results for any worker
/// count.
std::vector<RoundResult> run_federation(const FedConfig& cfg,
                                        std::vector<data::ClientDataset> datasets,
                                        unsigned workers = 0);

}  // namespace flmr::fed
