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

#include "fedx/params.hpp"

#include <cmath>
#include <numeric>

namespace fedx {

AggregationWeights::AggregationWeights(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) {
        throw EmptyInput("aggregation weights: empty");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const double w = weights_[i];
        if (!std::isfinite(w) || w < 0.0) {
            throw InvalidWeights("aggregation weight " + std::to_string(i) +
                                 " is negative or non-finite");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw InvalidWeights("aggregation weights sum to " + std::to_string(sum) + ", not 1");
    }
}

AggregationWeights AggregationWeights::from_sample_counts(std::span<const std::size_t> counts) {
    if (counts.empty()) {
        throw EmptyInput("aggregation weights: no sample counts");
    }
    const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    if (total == 0) {
        throw InvalidWeights("aggregation weights: all sample counts are zero");
    }
    std::vector<double> w;
    w.reserve(counts.size());
    for (std::size_t n : counts) {
        w.push_back(static_cast<double>(n) / static_cast<double>(total));
    }
    return AggregationWeights(std::move(w));
}

AggregationWeights AggregationWeights::uniform(std::size_t n) {
    if (n == 0) {
        throw EmptyInput("aggregation weights: n == 0");
    }
    return AggregationWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

LayerManifest::LayerManifest(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) {
        throw ManifestMismatch("manifest has no layers");
    }
    for (const auto& layer : layers_) {
        if (layer.rows < 1 || layer.cols < 1) {
            throw ManifestMismatch("layer '" + layer.name + "' has an empty shape");
        }
        dim_ += layer.size();
    }
}

void LayerManifest::check(const ParamVector& values) const {
    if (values.size() != dim_) {
        throw ManifestMismatch("vector of dim " + std::to_string(values.size()) +
                               " against manifest requiring " + std::to_string(dim_));
    }
}

ParamVector LayerManifest::flatten(const DecoderHead& head) const {
    if (head.size() != layers_.size()) {
        throw ManifestMismatch("decoder has " + std::to_string(head.size()) +
                               " layers, manifest has " + std::to_string(layers_.size()));
    }
    ParamVector out(dim_);
    Eigen::Index offset = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& shape = layers_[i];
        const auto& block = head[i];
        if (block.rows() != shape.rows || block.cols() != shape.cols) {
            throw ManifestMismatch("layer '" + shape.name + "' shape mismatch");
        }
        out.segment(offset, shape.size()) = block.reshaped();
        offset += shape.size();
    }
    return out;
}

DecoderHead LayerManifest::unflatten(const ParamVector& values) const {
    check(values);
    DecoderHead head;
    head.reserve(layers_.size());
    Eigen::Index offset = 0;
    for (const auto& shape : layers_) {
        head.emplace_back(values.segment(offset, shape.size()).reshaped(shape.rows, shape.cols));
        offset += shape.size();
    }
    return head;
}

}  // namespace fedx
