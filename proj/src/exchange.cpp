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

#include "fedx/exchange.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace fedx {

std::string_view to_string(Strategy s) noexcept {
    switch (s) {
        case Strategy::Clustered: return "clustered";
        case Strategy::RoundRobin: return "round_robin";
        case Strategy::Random: return "random";
        case Strategy::FedAvgOnly: return "fedavg_only";
        case Strategy::FedProx: return "fedprox";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view name) {
    for (Strategy s : {Strategy::Clustered, Strategy::RoundRobin, Strategy::Random,
                       Strategy::FedAvgOnly, Strategy::FedProx}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ConfigInvalid("unknown strategy '" + std::string(name) + "'");
}

bool is_permutation(std::span<const std::size_t> assignment) {
    std::vector<bool> seen(assignment.size(), false);
    for (std::size_t d : assignment) {
        if (d >= assignment.size() || seen[d]) {
            return false;
        }
        seen[d] = true;
    }
    return true;
}

std::size_t count_fixed_points(std::span<const std::size_t> assignment) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        count += assignment[i] == i ? 1 : 0;
    }
    return count;
}

std::size_t count_cross_deliveries(std::span<const std::size_t> assignment,
                                   const ClusterAssignment& ca) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        count += ca.label_of(i) != ca.label_of(assignment[i]) ? 1 : 0;
    }
    return count;
}

namespace {

void check_assignment(const ClusterAssignment& ca) {
    const std::size_t n = ca.size();
    if (n < 2) {
        throw InvalidAssignment("exchange needs at least 2 clients");
    }
    if (ca.members(0).empty() || ca.members(1).empty() ||
        ca.members(0).size() + ca.members(1).size() != n) {
        throw InvalidAssignment("cluster assignment is not a two-block partition");
    }
    for (int label : {0, 1}) {
        for (std::size_t i : ca.members(label)) {
            if (i >= n || ca.label_of(i) != label) {
                throw InvalidAssignment("cluster members disagree with the index list");
            }
        }
    }
}

// One cursor per shuffled list; the walk never runs both lists dry because
// total demand on each list equals its length.
std::vector<std::size_t> cross_walk(const ClusterAssignment& ca,
                                    const std::vector<std::size_t>& shuffled0,
                                    const std::vector<std::size_t>& shuffled1) {
    const std::vector<std::size_t>* lists[2] = {&shuffled0, &shuffled1};
    std::size_t cursor[2] = {0, 0};
    std::vector<std::size_t> assignment(ca.size());
    for (std::size_t i = 0; i < ca.size(); ++i) {
        const int own = ca.label_of(i);
        const int other = 1 - own;
        const int source = cursor[other] < lists[other]->size() ? other : own;
        if (cursor[source] >= lists[source]->size()) {
            throw InvalidAssignment("exchange walk ran out of decoders");
        }
        assignment[i] = (*lists[source])[cursor[source]++];
    }
    return assignment;
}

bool differs_from(const std::vector<std::size_t>& assignment,
                  const std::vector<std::size_t>& previous) {
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == previous[i]) {
            return false;
        }
    }
    return true;
}

// Swaps each self-delivery with another delivery of a same-cluster decoder.
// The swap keeps the cross-delivery count and cannot create a new fixed point.
void repair_fixed_points(std::vector<std::size_t>& assignment, const ClusterAssignment& ca) {
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != i) continue;
        for (std::size_t p = 0; p < assignment.size(); ++p) {
            if (p != i && ca.label_of(assignment[p]) == ca.label_of(i)) {
                std::swap(assignment[i], assignment[p]);
                break;
            }
        }
    }
}

}  // namespace

ExchangePlan build_clustered_plan(const ClusterAssignment& ca, const ExchangeHistory& history,
                                  std::uint64_t rng_seed) {
    check_assignment(ca);
    const std::size_t n = ca.size();
    const std::vector<std::size_t>* previous = nullptr;
    if (history.last_assignment) {
        if (history.last_assignment->size() != n) {
            throw InvalidAssignment("exchange history length does not match client count");
        }
        previous = &*history.last_assignment;
    }

    std::mt19937_64 rng(rng_seed);
    std::vector<std::size_t> shuffled0 = ca.members(0);
    std::vector<std::size_t> shuffled1 = ca.members(1);
    std::vector<std::size_t> assignment;

    auto draw = [&] {
        std::shuffle(shuffled0.begin(), shuffled0.end(), rng);
        std::shuffle(shuffled1.begin(), shuffled1.end(), rng);
        assignment = cross_walk(ca, shuffled0, shuffled1);
    };

    ExchangePlan plan;
    plan.strategy = Strategy::Clustered;
    for (int attempt = 0; attempt < kExchangeAttempts; ++attempt) {
        draw();
        if (count_fixed_points(assignment) == 0 &&
            (previous == nullptr || differs_from(assignment, *previous))) {
            plan.assignment = std::move(assignment);
            return plan;
        }
    }

    plan.history_relaxed = previous != nullptr;
    for (int attempt = 0; attempt < kExchangeAttempts; ++attempt) {
        draw();
        if (count_fixed_points(assignment) == 0) {
            plan.assignment = std::move(assignment);
            return plan;
        }
    }
    repair_fixed_points(assignment, ca);
    plan.assignment = std::move(assignment);
    return plan;
}

ExchangePlan build_round_robin_plan(std::size_t n, std::uint64_t round) {
    if (n < 2) {
        throw InvalidAssignment("round-robin exchange needs at least 2 clients");
    }
    const std::size_t shift = 1 + static_cast<std::size_t>(round % (n - 1));
    ExchangePlan plan;
    plan.strategy = Strategy::RoundRobin;
    plan.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        plan.assignment[i] = (i + shift) % n;
    }
    return plan;
}

ExchangePlan build_random_plan(std::size_t n, std::uint64_t rng_seed) {
    if (n < 2) {
        throw InvalidAssignment("random exchange needs at least 2 clients");
    }
    ExchangePlan plan;
    plan.strategy = Strategy::Random;
    plan.assignment.resize(n);
    std::iota(plan.assignment.begin(), plan.assignment.end(), std::size_t{0});
    std::mt19937_64 rng(rng_seed);
    std::shuffle(plan.assignment.begin(), plan.assignment.end(), rng);
    return plan;
}

}  // namespace fedx
