/*
 * Copyright 2026 The fedx Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedx/server.hpp"

#include <random>
#include <string>

#include "fedx/seed.hpp"

namespace fedx {

void ServerConfig::validate() const {
    if (rounds < 1) {
        throw ConfigInvalid("rounds must be >= 1");
    }
    if (aggregation_frequency < 1) {
        throw ConfigInvalid("aggregation frequency must be >= 1");
    }
    if (warmup_rounds < 0) {
        throw ConfigInvalid("warmup_rounds must be >= 0");
    }
    const int t = effective_frequency();
    if (rounds % t != 0) {
        throw ConfigInvalid("rounds (" + std::to_string(rounds) +
                            ") must be a multiple of the aggregation frequency (" +
                            std::to_string(t) + ")");
    }
}

Decision schedule_decision(int round, int aggregation_frequency) {
    if (aggregation_frequency < 1) {
        throw ConfigInvalid("aggregation frequency must be >= 1");
    }
    return round % aggregation_frequency == 0 ? Decision::Aggregate : Decision::Exchange;
}

namespace {

ExchangePlan build_plan(ServerState& state, const ClusterAssignment& ca, const ServerConfig& cfg,
                        int round) {
    const std::size_t n = ca.size();
    switch (cfg.strategy) {
        case Strategy::Clustered:
            return build_clustered_plan(
                ca, state.exchange_history,
                derive_seed(cfg.master_seed, SeedPurpose::Exchange, static_cast<std::uint64_t>(round)));
        case Strategy::RoundRobin:
            return build_round_robin_plan(n, state.exchange_count);
        case Strategy::Random:
            return build_random_plan(
                n, derive_seed(cfg.master_seed, SeedPurpose::Exchange, static_cast<std::uint64_t>(round)));
        case Strategy::FedAvgOnly:
        case Strategy::FedProx:
            break;
    }
    throw ConfigInvalid("strategy " + std::string(to_string(cfg.strategy)) + " does not exchange");
}

std::vector<Delivery> run_round_impl(ServerState& state, std::span<const ParamVector> uploads,
                                     const AggregationWeights& weights, const ServerConfig& cfg,
                                     int round) {
    if (uploads.size() < 2) {
        throw TooFewDecoders("need uploads from at least 2 clients");
    }
    const auto dim = uploads.front().size();
    for (const auto& u : uploads) {
        if (u.size() != dim) {
            throw DimensionMismatch("uploads differ in dim");
        }
    }

    RoundRecord record;
    record.round = round;
    record.decision = schedule_decision(round, cfg.effective_frequency());
    std::vector<Delivery> deliveries;
    deliveries.reserve(uploads.size());

    if (record.decision == Decision::Aggregate) {
        ParamVector global = weighted_average<double>(uploads, weights);
        for (std::size_t i = 0; i < uploads.size(); ++i) {
            deliveries.push_back({global, std::nullopt});
        }
        state.latest_global_decoder = std::move(global);
        record.global_eval = true;
    } else {
        const DistanceMatrix dm = build_distance_matrix(uploads);
        ClusteringResult clustering = agglomerate_to_two(dm);
        ExchangePlan plan = build_plan(state, clustering.assignment, cfg, round);
        for (std::size_t i = 0; i < uploads.size(); ++i) {
            const std::size_t source = plan.assignment[i];
            deliveries.push_back({uploads[source], source});
        }
        state.exchange_history.last_assignment = plan.assignment;
        ++state.exchange_count;
        record.global_eval = false;
        record.clusters = ClusterSnapshot{clustering.assignment.index_list(),
                                          std::move(clustering.merges), dm.entries()};
        record.plan = std::move(plan);
    }

    state.current_round = round;
    state.trace.push_back(std::move(record));
    return deliveries;
}

}  // namespace

std::vector<Delivery> run_round(ServerState& state, std::span<const ParamVector> uploads,
                                const AggregationWeights& weights, const ServerConfig& cfg) {
    const int round = state.current_round + 1;
    try {
        return run_round_impl(state, uploads, weights, cfg, round);
    } catch (const RoundError&) {
        throw;
    } catch (const std::exception& e) {
        throw RoundError(round, e.what());
    }
}

ParamVector initial_decoder(Eigen::Index dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.01);
    ParamVector g(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
        g(k) = normal(rng);
    }
    return g;
}

namespace {

void check_clients(const std::vector<ClientState>& clients) {
    if (clients.size() < 2) {
        throw ConfigInvalid("need at least 2 clients, got " + std::to_string(clients.size()));
    }
    const auto& first = clients.front();
    if (!first.backbone) {
        throw ConfigInvalid("client 0 has no backbone");
    }
    for (std::size_t i = 0; i < clients.size(); ++i) {
        const auto& c = clients[i];
        if (c.backbone != first.backbone) {
            throw ConfigInvalid("client " + std::to_string(i) + " uses a different backbone");
        }
        if (c.data.train.features.cols() != first.backbone->feature_dim() ||
            c.data.test.features.cols() != first.backbone->feature_dim()) {
            throw ManifestMismatch("client " + std::to_string(i) +
                                   " features disagree with the backbone");
        }
        if (c.task != first.task) {
            throw ConfigInvalid("clients mix regression and classification tasks");
        }
    }
}

RoundRecord evaluate_global(int round, Decision decision, const ParamVector& global,
                            const std::vector<ClientState>& clients) {
    RoundRecord record;
    record.round = round;
    record.decision = decision;
    record.global_eval = true;
    for (const auto& c : clients) {
        record.domain_metrics.push_back(evaluate(global, c));
    }
    record.summarize();
    return record;
}

}  // namespace

std::vector<RoundRecord> run_warmup(const ServerConfig& cfg, std::vector<ClientState>& clients) {
    check_clients(clients);
    const std::size_t n = clients.size();
    const Eigen::Index dim = decoder_manifest(clients.front().backbone->feature_dim()).dim();
    const AggregationWeights weights = training_weights(clients);

    ParamVector global = initial_decoder(dim, derive_seed(cfg.master_seed, SeedPurpose::InitialDecoder));
    std::vector<RoundRecord> records;
    std::vector<ParamVector> uploads(n);
    for (int w = 1; w <= cfg.warmup_rounds; ++w) {
        for (std::size_t i = 0; i < n; ++i) {
            uploads[i] = local_train(global, clients[i],
                                     derive_seed(cfg.master_seed, SeedPurpose::WarmupTraining,
                                                 static_cast<std::uint64_t>(w), i));
        }
        global = weighted_average(uploads, weights);
        records.push_back(evaluate_global(w - cfg.warmup_rounds, Decision::Warmup, global, clients));
    }
    for (auto& c : clients) {
        c.decoder = global;
        c.received_from.reset();
    }
    return records;
}

SimulationTrace run_simulation(const ServerConfig& cfg, std::vector<ClientState>& clients) {
    cfg.validate();
    check_clients(clients);
    const std::size_t n = clients.size();
    const AggregationWeights weights = training_weights(clients);

    SimulationTrace out;
    out.warmup = run_warmup(cfg, clients);
    std::vector<ParamVector> uploads(n);

    ServerState state;
    state.latest_global_decoder = clients.front().decoder;
    for (int r = 1; r <= cfg.rounds; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint64_t seed = derive_seed(cfg.master_seed, SeedPurpose::LocalTraining,
                                                   static_cast<std::uint64_t>(r), i);
            try {
                if (cfg.strategy == Strategy::FedProx) {
                    uploads[i] = local_train_fedprox(clients[i].decoder, clients[i],
                                                     *state.latest_global_decoder,
                                                     clients[i].local.prox_mu, seed);
                } else {
                    uploads[i] = local_train(clients[i].decoder, clients[i], seed);
                }
            } catch (const std::exception& e) {
                throw RoundError(r, "client " + std::to_string(i) + ": " + e.what());
            }
        }

        std::vector<Delivery> deliveries = run_round(state, uploads, weights, cfg);
        RoundRecord& record = state.trace.back();
        if (record.decision == Decision::Aggregate) {
            for (const auto& c : clients) {
                record.domain_metrics.push_back(evaluate(*state.latest_global_decoder, c));
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                record.domain_metrics.push_back(evaluate(uploads[i], clients[i]));
            }
        }
        record.summarize();

        for (std::size_t i = 0; i < n; ++i) {
            clients[i].decoder = std::move(deliveries[i].decoder);
            clients[i].received_from = deliveries[i].source;
        }
    }

    out.rounds = std::move(state.trace);
    out.final_global_decoder = *state.latest_global_decoder;
    return out;
}

}  // namespace fedx
