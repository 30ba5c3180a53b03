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

#include "fedx/trace.hpp"

#include <algorithm>
#include <cmath>

namespace fedx {

std::string_view to_string(Decision d) noexcept {
    switch (d) {
        case Decision::Warmup: return "warmup";
        case Decision::Aggregate: return "aggregate";
        case Decision::Exchange: return "exchange";
    }
    return "unknown";
}

Spread mean_and_std(std::span<const double> values) {
    if (values.empty()) {
        throw EmptyInput("mean_and_std: no values");
    }
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / n;
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / n)};
}

void RoundRecord::summarize() {
    std::vector<double> losses;
    std::vector<double> accuracies;
    for (const auto& m : domain_metrics) {
        losses.push_back(m.loss);
        if (m.accuracy) accuracies.push_back(*m.accuracy);
    }
    loss = mean_and_std(losses);
    if (!accuracies.empty() && accuracies.size() == losses.size()) {
        accuracy = mean_and_std(accuracies);
    } else {
        accuracy.reset();
    }
}

double RoundRecord::worst_domain_loss() const {
    if (domain_metrics.empty()) {
        throw EmptyInput("round record has no metrics");
    }
    double worst = domain_metrics.front().loss;
    for (const auto& m : domain_metrics) worst = std::max(worst, m.loss);
    return worst;
}

}  // namespace fedx
