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

#ifndef FEDX_TRACE_HPP
#define FEDX_TRACE_HPP

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fedx/clients.hpp"
#include "fedx/clustering.hpp"
#include "fedx/exchange.hpp"

namespace fedx {

enum class Decision {
    Warmup,
    Aggregate,
    Exchange,
};

std::string_view to_string(Decision d) noexcept;

struct ClusterSnapshot {
    std::vector<int> index_list;
    std::vector<MergeStep> merges;
    Eigen::MatrixXd distances;
};

/// Mean and population standard deviation.
struct Spread {
    double mean = 0.0;
    double stddev = 0.0;
};

Spread mean_and_std(std::span<const double> values);

struct RoundRecord {
    /// Protocol rounds count from 1; warm-up rounds are numbered 1 - W .. 0.
    int round = 0;
    Decision decision = Decision::Aggregate;
    /// True when metrics come from one aggregated decoder rather than each
    /// client's own local decoder.
    bool global_eval = true;
    /// One entry per domain, in client order.
    std::vector<EvalMetrics> domain_metrics;
    Spread loss;
    std::optional<Spread> accuracy;
    std::optional<ClusterSnapshot> clusters;
    std::optional<ExchangePlan> plan;

    /// Fills `loss` and `accuracy` from `domain_metrics`.
    void summarize();

    /// Highest per-domain loss.
    double worst_domain_loss() const;
};

}  // namespace fedx

#endif  // FEDX_TRACE_HPP
