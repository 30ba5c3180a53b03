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

#ifndef FEDX_EXCHANGE_HPP
#define FEDX_EXCHANGE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedx/clustering.hpp"

namespace fedx {

enum class Strategy {
    Clustered,
    RoundRobin,
    Random,
    FedAvgOnly,
    FedProx,
};

std::string_view to_string(Strategy s) noexcept;

/// Parses "clustered", "round_robin", "random", "fedavg_only" or "fedprox".
/// Throws ConfigInvalid on anything else.
Strategy parse_strategy(std::string_view name);

/// True for strategies that exchange decoders between aggregation rounds.
constexpr bool exchanges_decoders(Strategy s) noexcept {
    return s == Strategy::Clustered || s == Strategy::RoundRobin || s == Strategy::Random;
}

/// Delivery map for one exchange round: client i receives the decoder
/// uploaded by client assignment[i].
struct ExchangePlan {
    std::vector<std::size_t> assignment;
    Strategy strategy = Strategy::Clustered;
    /// Set when no sampled shuffle could avoid last round's deliveries.
    bool history_relaxed = false;

    bool operator==(const ExchangePlan&) const = default;
};

struct ExchangeHistory {
    std::optional<std::vector<std::size_t>> last_assignment;
};

/// Number of shuffles tried against the full constraint set before the
/// previous-round constraint is dropped.
inline constexpr int kExchangeAttempts = 32;

/// In-cluster shuffle followed by the cross-cluster walk.
///
/// Both clusters' decoder lists are shuffled with the seeded generator. The
/// server then walks clients in index order: a client takes the next unused
/// decoder from the other cluster's shuffled list, or from its own list once
/// the other is used up. Shuffles are redrawn until no client gets its own
/// decoder back and, when history is present, no client gets the same source
/// as last time. After kExchangeAttempts failures the history constraint is
/// relaxed; the self-delivery constraint is always met for n >= 2.
ExchangePlan build_clustered_plan(const ClusterAssignment& ca, const ExchangeHistory& history,
                                  std::uint64_t rng_seed);

/// assignment[i] = (i + k) mod n with k = 1 + (round mod (n - 1)).
ExchangePlan build_round_robin_plan(std::size_t n, std::uint64_t round);

/// Uniform random permutation; fixed points allowed.
ExchangePlan build_random_plan(std::size_t n, std::uint64_t rng_seed);

bool is_permutation(std::span<const std::size_t> assignment);

std::size_t count_fixed_points(std::span<const std::size_t> assignment);

/// Deliveries where the receiving client and the source decoder sit in
/// different clusters.
std::size_t count_cross_deliveries(std::span<const std::size_t> assignment,
                                   const ClusterAssignment& ca);

}  // namespace fedx

#endif  // FEDX_EXCHANGE_HPP
