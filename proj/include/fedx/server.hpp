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

#ifndef FEDX_SERVER_HPP
#define FEDX_SERVER_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedx/clients.hpp"
#include "fedx/exchange.hpp"
#include "fedx/params.hpp"
#include "fedx/trace.hpp"

namespace fedx {

struct ServerConfig {
    int rounds = 40;
    int aggregation_frequency = 2;
    Strategy strategy = Strategy::Clustered;
    int warmup_rounds = 0;
    std::uint64_t master_seed = 0;

    /// 1 for the aggregate-every-round baselines, otherwise the configured T.
    int effective_frequency() const noexcept {
        return exchanges_decoders(strategy) ? aggregation_frequency : 1;
    }

    /// Throws ConfigInvalid unless R >= 1, T >= 1, R mod T == 0 and
    /// warmup_rounds >= 0.
    void validate() const;
};

/// Aggregate iff r mod T == 0.
Decision schedule_decision(int round, int aggregation_frequency);

struct ServerState {
    /// Last completed protocol round; 0 before round 1.
    int current_round = 0;
    std::optional<ParamVector> latest_global_decoder;
    ExchangeHistory exchange_history;
    /// Exchange rounds completed so far; drives the round-robin shift.
    std::uint64_t exchange_count = 0;
    std::vector<RoundRecord> trace;
};

struct Delivery {
    ParamVector decoder;
    /// Uploading client for exchanged decoders; empty for the global decoder.
    std::optional<std::size_t> source;
};

/// Runs protocol round state.current_round + 1 on the uploads.
///
/// On an aggregation round every client receives the weighted average and
/// the global decoder is updated. On an exchange round the uploads are
/// clustered, a plan is built for cfg.strategy and client i receives
/// uploads[plan.assignment[i]]. A RoundRecord without metrics is appended
/// either way. Errors are rethrown as RoundError.
std::vector<Delivery> run_round(ServerState& state, std::span<const ParamVector> uploads,
                                const AggregationWeights& weights, const ServerConfig& cfg);

/// Small seeded decoder every client starts from.
ParamVector initial_decoder(Eigen::Index dim, std::uint64_t seed);

/// Warm-up: every round each client trains from the shared decoder and the
/// results are aggregated. Leaves every client holding the same decoder and
/// returns one record per warm-up round.
std::vector<RoundRecord> run_warmup(const ServerConfig& cfg, std::vector<ClientState>& clients);

struct SimulationTrace {
    std::vector<RoundRecord> warmup;
    std::vector<RoundRecord> rounds;
    ParamVector final_global_decoder;
};

/// Warm-up (local training plus aggregation each round) followed by R
/// protocol rounds of train, upload, run_round and redistribute. Every
/// random choice derives from cfg.master_seed, so replays are bit-identical.
/// `clients` is updated in place with the decoders they hold at the end.
SimulationTrace run_simulation(const ServerConfig& cfg, std::vector<ClientState>& clients);

}  // namespace fedx

#endif  // FEDX_SERVER_HPP
