#include "flmr/fed/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <numeric>
#include <string>
#include <thread>

#include "flmr/error.hpp"
#include "flmr/rng.hpp"

namespace flmr::fed {

namespace {

constexpr std::uint64_t kParticipationStreamTag = 0x9db452f61c8a7e31ULL;

nn::ModelParams zero_params(const nn::MlpConfig& mlp) {
    const std::array<int, 4> widths{mlp.input_dim, mlp.hidden_dims[0], mlp.hidden_dims[1],
                                    mlp.output_dim};
    nn::ModelParams params;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        nn::LayerTensors layer;
        layer.w = Eigen::MatrixXd::Zero(widths[l + 1], widths[l]);
        layer.b = Eigen::VectorXd::Zero(widths[l + 1]);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

// Runs fn over every item; any worker count yields the same results because
// items are independent. Exceptions are re-raised for the smallest item
// index, wrapped with the caller-supplied context.
void parallel_for(std::size_t item_count, unsigned workers,
                  const std::function<void(std::size_t)>& fn,
                  const std::function<std::string(std::size_t)>& context) {
    if (item_count == 0) {
        return;
    }
    unsigned n_threads = workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
    n_threads = static_cast<unsigned>(
        std::min<std::size_t>(n_threads, item_count));

    std::vector<std::exception_ptr> errors(item_count);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < item_count; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto body = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= item_count) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) {
            pool.emplace_back(body);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (std::size_t i = 0; i < item_count; ++i) {
        if (errors[i]) {
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
                throw Error(context(i) + ": " + e.what());
            }
        }
    }
}

// Loss and satisfaction of fixed parameters on one feature/target block.
std::pair<double, double> evaluate_block(const nn::ModelParams& params,
                                         const Eigen::MatrixXd& features,
                                         const Eigen::VectorXd& targets, const FedConfig& cfg) {
    const auto [predictions, trace] = nn::forward(params, features);
    const auto report = logic::evaluate_satisfaction(predictions, targets, cfg.fuzzy);
    if (cfg.loss_kind == LossKind::kFlmr) {
        return {report.loss, report.phi};
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < predictions.size(); ++i) {
        total += baseline::deepcog_loss(predictions[i], targets[i], cfg.deepcog);
    }
    return {total / static_cast<double>(predictions.size()), report.phi};
}

}  // namespace

void validate(const FedConfig& cfg) {
    if (cfg.clients < 1) {
        throw ConfigError("FedConfig: clients must be >= 1");
    }
    if (cfg.rounds < 1) {
        throw ConfigError("FedConfig: rounds must be >= 1");
    }
    if (cfg.local_epochs < 1) {
        throw ConfigError("FedConfig: local_epochs must be >= 1");
    }
    if (cfg.batch_size < 1) {
        throw ConfigError("FedConfig: batch_size must be >= 1");
    }
    if (cfg.participants < 0 || cfg.participants > cfg.clients) {
        throw ConfigError("FedConfig: participants must lie in [0, clients]");
    }
    if (!(cfg.optimizer.rho > 0.0 && cfg.optimizer.rho < 1.0)) {
        throw ConfigError("FedConfig: optimizer rho must lie in (0, 1)");
    }
    if (!(cfg.optimizer.epsilon > 0.0)) {
        throw ConfigError("FedConfig: optimizer epsilon must be positive");
    }
    logic::validate(cfg.fuzzy);
    baseline::validate(cfg.deepcog);
    nn::validate(cfg.mlp);
}

ClientState make_client_state(data::ClientDataset dataset, const FedConfig& cfg) {
    if (cfg.mlp.input_dim != data::kFeatureCount) {
        throw ConfigError("make_client_state: mlp input_dim must equal the feature count " +
                          std::to_string(data::kFeatureCount));
    }
    if (dataset.train_count == 0 || dataset.train_count == dataset.records.size()) {
        throw ConfigError("make_client_state: client " + std::to_string(dataset.client_id) +
                          " needs non-empty train and test blocks");
    }
    ClientState state;
    state.client_id = dataset.client_id;
    std::tie(state.train_features, state.train_targets) =
        data::normalize(dataset.train_records(), dataset.feature_stats);
    std::tie(state.test_features, state.test_targets) =
        data::normalize(dataset.test_records(), dataset.feature_stats);
    state.dataset = std::move(dataset);
    state.params = zero_params(cfg.mlp);
    state.opt_state = nn::make_adadelta_state(state.params, cfg.optimizer.rho,
                                              cfg.optimizer.epsilon, cfg.optimizer.step_scale);
    return state;
}

LocalMetrics local_train(ClientState& client, const nn::ModelParams& global_params,
                         const FedConfig& cfg, int round) {
    if (!nn::shapes_match(client.params, global_params)) {
        throw ConfigError("local_train: broadcast params do not match client " +
                          std::to_string(client.client_id));
    }
    client.params = global_params;

    const auto n = static_cast<std::size_t>(client.train_features.rows());
    std::vector<std::size_t> order(n);
    Rng rng(derive_stream(cfg.seed, static_cast<std::uint64_t>(client.client_id),
                          static_cast<std::uint64_t>(round)));

    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    double phi_weighted = 0.0;
    double loss_weighted = 0.0;
    double weight = 0.0;

    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        deterministic_shuffle(order, rng);
        const bool last_epoch = epoch + 1 == cfg.local_epochs;

        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t count = std::min(batch_size, n - start);
            Eigen::MatrixXd features(static_cast<Eigen::Index>(count), client.train_features.cols());
            Eigen::VectorXd targets(static_cast<Eigen::Index>(count));
            for (std::size_t i = 0; i < count; ++i) {
                const auto src = static_cast<Eigen::Index>(order[start + i]);
                features.row(static_cast<Eigen::Index>(i)) = client.train_features.row(src);
                targets[static_cast<Eigen::Index>(i)] = client.train_targets[src];
            }

            const auto [predictions, trace] = nn::forward(client.params, features);
            double batch_loss;
            double batch_phi;
            Eigen::VectorXd dloss_dpred;
            if (cfg.loss_kind == LossKind::kFlmr) {
                auto [report, grad] = logic::loss_and_grad(predictions, targets, cfg.fuzzy);
                batch_loss = report.loss;
                batch_phi = report.phi;
                dloss_dpred = std::move(grad);
            } else {
                auto [loss, grad] = baseline::deepcog_loss_and_grad(predictions, targets, cfg.deepcog);
                batch_loss = loss;
                batch_phi = logic::evaluate_satisfaction(predictions, targets, cfg.fuzzy).phi;
                dloss_dpred = std::move(grad);
            }

            const auto grads = nn::backward(client.params, trace, dloss_dpred);
            std::tie(client.params, client.opt_state) =
                nn::adadelta_step(client.params, grads, client.opt_state);

            if (last_epoch) {
                const auto w = static_cast<double>(count);
                phi_weighted += w * batch_phi;
                loss_weighted += w * batch_loss;
                weight += w;
            }
        }
    }

    LocalMetrics metrics;
    metrics.train_phi = phi_weighted / weight;
    metrics.train_loss = cfg.loss_kind == LossKind::kFlmr ? 1.0 - metrics.train_phi
                                                          : loss_weighted / weight;
    return metrics;
}

nn::ModelParams fedavg(std::span<const WeightedUpdate> updates) {
    if (updates.empty()) {
        throw UsageError("fedavg: no updates to aggregate");
    }
    std::vector<const WeightedUpdate*> ordered;
    ordered.reserve(updates.size());
    for (const auto& u : updates) {
        if (u.sample_count == 0) {
            throw UsageError("fedavg: client " + std::to_string(u.client_id) +
                             " reports zero samples");
        }
        ordered.push_back(&u);
    }
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto* a, const auto* b) { return a->client_id < b->client_id; });

    double total = 0.0;
    for (const auto* u : ordered) {
        total += static_cast<double>(u->sample_count);
    }

    // Anchor at the first update and add weighted corrections in ascending
    // client order. Algebraically this equals sum_k (D_k / D) W_k, and it
    // keeps two exact identities the plain weighted sum loses to rounding:
    // a single update comes back bit-identical, and averaging identical
    // parameter sets returns them unchanged.
    nn::ModelParams result = ordered.front()->params;
    for (std::size_t k = 1; k < ordered.size(); ++k) {
        const auto& update = *ordered[k];
        if (!nn::shapes_match(result, update.params)) {
            throw AggregationError("fedavg: shape mismatch in update from client " +
                                   std::to_string(update.client_id));
        }
        const double coeff = static_cast<double>(update.sample_count) / total;
        for (std::size_t l = 0; l < result.layers.size(); ++l) {
            result.layers[l].w += coeff * (update.params.layers[l].w - ordered.front()->params.layers[l].w);
            result.layers[l].b += coeff * (update.params.layers[l].b - ordered.front()->params.layers[l].b);
        }
    }
    return result;
}

std::vector<RoundResult> run_federation(const FedConfig& cfg,
                                        std::vector<data::ClientDataset> datasets,
                                        unsigned workers) {
    validate(cfg);
    if (datasets.size() != static_cast<std::size_t>(cfg.clients)) {
        throw ConfigError("run_federation: expected " + std::to_string(cfg.clients) +
                          " datasets, got " + std::to_string(datasets.size()));
    }
    std::sort(datasets.begin(), datasets.end(),
              [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
    for (std::size_t k = 1; k < datasets.size(); ++k) {
        if (datasets[k].client_id == datasets[k - 1].client_id) {
            throw ConfigError("run_federation: duplicate client id " +
                              std::to_string(datasets[k].client_id));
        }
    }

    const auto n_clients = datasets.size();
    std::vector<ClientState> states(n_clients);
    parallel_for(
        n_clients, workers,
        [&](std::size_t k) { states[k] = make_client_state(std::move(datasets[k]), cfg); },
        [&](std::size_t k) {
            return "client setup " + std::to_string(k);
        });

    nn::ModelParams global = nn::init_params(cfg.mlp, cfg.seed);
    const std::size_t m = cfg.participants == 0 ? n_clients
                                                : static_cast<std::size_t>(cfg.participants);

    std::vector<RoundResult> results;
    results.reserve(static_cast<std::size_t>(cfg.rounds));

    for (int t = 0; t < cfg.rounds; ++t) {
        const auto t_start = std::chrono::steady_clock::now();

        // Participant selection; m == K keeps everyone in, matching the
        // full-sum aggregation default.
        std::vector<std::size_t> selected(n_clients);
        std::iota(selected.begin(), selected.end(), std::size_t{0});
        if (m < n_clients) {
            Rng pick(derive_stream(cfg.seed, kParticipationStreamTag,
                                   static_cast<std::uint64_t>(t)));
            deterministic_shuffle(selected, pick);
            selected.resize(m);
            std::sort(selected.begin(), selected.end());
        }

        std::vector<LocalMetrics> local(n_clients);
        std::vector<char> participated(n_clients, 0);
        for (const auto idx : selected) {
            participated[idx] = 1;
        }
        parallel_for(
            selected.size(), workers,
            [&](std::size_t s) {
                const std::size_t idx = selected[s];
                local[idx] = local_train(states[idx], global, cfg, t);
            },
            [&](std::size_t s) {
                return "round " + std::to_string(t) + ", client " +
                       std::to_string(states[selected[s]].client_id);
            });

        std::vector<WeightedUpdate> updates;
        updates.reserve(selected.size());
        for (const auto idx : selected) {
            // D_k is the client's full local record count.
            updates.push_back(WeightedUpdate{states[idx].client_id, states[idx].params,
                                             states[idx].dataset.records.size()});
        }
        global = fedavg(updates);

        RoundResult round_result;
        round_result.round = t;
        round_result.global_params = global;
        round_result.per_client.reserve(n_clients);
        for (std::size_t idx = 0; idx < n_clients; ++idx) {
            ClientMetrics cm;
            cm.client_id = states[idx].client_id;
            if (participated[idx]) {
                cm.train_loss = local[idx].train_loss;
                cm.train_phi = local[idx].train_phi;
            } else {
                // Clients skipped this round report the new global model's
                // fit on their training block.
                std::tie(cm.train_loss, cm.train_phi) =
                    evaluate_block(global, states[idx].train_features, states[idx].train_targets, cfg);
            }
            std::tie(cm.test_loss, cm.test_phi) =
                evaluate_block(global, states[idx].test_features, states[idx].test_targets, cfg);
            round_result.per_client.push_back(cm);
        }
        round_result.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        results.push_back(std::move(round_result));
    }
    return results;
}

}  // namespace flmr::fed
