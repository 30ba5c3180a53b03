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

#ifndef FEDX_PARAMS_HPP
#define FEDX_PARAMS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedx/errors.hpp"

namespace fedx {

/// Flattened decoder weights in the manifest's canonical order.
template <typename Scalar>
using ParamVectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using ParamVector = ParamVectorT<double>;

/// Throws unless `v` is non-empty and every entry is finite.
template <typename Derived>
void check_param_vector(const Eigen::MatrixBase<Derived>& v) {
    if (v.size() < 1) {
        throw EmptyInput("parameter vector must have dim >= 1");
    }
    if (!v.allFinite()) {
        throw NonFiniteValue("parameter vector contains NaN or Inf");
    }
}

/// Cosine distance 1 - a.b / (|a| |b|), in [0, 2].
///
/// The full vector is used, biases included. A zero-magnitude operand is an
/// error: an untrained or degenerate decoder must not be silently placed at
/// distance 1 from everything else.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_distance(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    if (a.size() != b.size()) {
        throw DimensionMismatch("cosine_distance: dim " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    }
    const Scalar na = a.norm();
    const Scalar nb = b.norm();
    if (na == Scalar(0)) {
        throw ZeroNormVector("cosine_distance: first operand has zero norm");
    }
    if (nb == Scalar(0)) {
        throw ZeroNormVector("cosine_distance: second operand has zero norm");
    }
    // Normalizing first keeps the product exact for identical inputs and
    // makes the result invariant to positive rescaling.
    Scalar cosine = (a / na).dot(b / nb);
    cosine = std::clamp(cosine, Scalar(-1), Scalar(1));
    return Scalar(1) - cosine;
}

/// Per-client aggregation weights n_i / n.
class AggregationWeights {
public:
    static constexpr double kSumTolerance = 1e-9;

    /// Validates non-negativity and that the weights sum to one.
    explicit AggregationWeights(std::vector<double> weights);

    /// w_i = n_i / sum_j n_j.
    static AggregationWeights from_sample_counts(std::span<const std::size_t> counts);

    static AggregationWeights uniform(std::size_t n);

    const std::vector<double>& values() const noexcept { return weights_; }
    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }

private:
    std::vector<double> weights_;
};

/// Elementwise sum_i w_i * g_i.
template <typename Scalar>
ParamVectorT<Scalar> weighted_average(std::span<const ParamVectorT<Scalar>> decoders,
                                      const AggregationWeights& w) {
    if (decoders.empty()) {
        throw EmptyInput("weighted_average: no decoders");
    }
    if (decoders.size() != w.size()) {
        throw DimensionMismatch("weighted_average: " + std::to_string(decoders.size()) +
                                " decoders but " + std::to_string(w.size()) + " weights");
    }
    const auto dim = decoders.front().size();
    ParamVectorT<Scalar> out = ParamVectorT<Scalar>::Zero(dim);
    for (std::size_t i = 0; i < decoders.size(); ++i) {
        if (decoders[i].size() != dim) {
            throw DimensionMismatch("weighted_average: decoder " + std::to_string(i) +
                                    " has dim " + std::to_string(decoders[i].size()));
        }
        out.noalias() += static_cast<Scalar>(w[i]) * decoders[i];
    }
    return out;
}

inline ParamVector weighted_average(const std::vector<ParamVector>& decoders,
                                    const AggregationWeights& w) {
    return weighted_average<double>(std::span<const ParamVector>(decoders), w);
}

/// One named dense block of a decoder.
struct LayerShape {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    Eigen::Index size() const noexcept { return rows * cols; }
    bool operator==(const LayerShape&) const = default;
};

/// A decoder as its list of dense blocks, in manifest order.
using DecoderHead = std::vector<Eigen::MatrixXd>;

/// Layer shapes shared by every decoder in one simulation. Flattening walks
/// the layers in manifest order, each block in column-major order.
class LayerManifest {
public:
    LayerManifest() = default;
    explicit LayerManifest(std::vector<LayerShape> layers);

    const std::vector<LayerShape>& layers() const noexcept { return layers_; }
    Eigen::Index dim() const noexcept { return dim_; }

    ParamVector flatten(const DecoderHead& head) const;
    DecoderHead unflatten(const ParamVector& values) const;

    /// Throws ManifestMismatch unless `values` has this manifest's dim.
    void check(const ParamVector& values) const;

    bool operator==(const LayerManifest&) const = default;

private:
    std::vector<LayerShape> layers_;
    Eigen::Index dim_ = 0;
};

}  // namespace fedx

#endif  // FEDX_PARAMS_HPP
