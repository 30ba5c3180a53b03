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

#ifndef FEDX_CLIENTS_HPP
#define FEDX_CLIENTS_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "fedx/params.hpp"

namespace fedx {

enum class TaskKind {
    Regression,
    Classification,
};

std::string_view to_string(TaskKind t) noexcept;
TaskKind parse_task(std::string_view name);

/// Generator parameters for one client's domain.
struct DomainSpec {
    int domain_id = 0;
    /// Full local training set size n_i, before any fraction is applied.
    std::size_t sample_count = 0;
    std::size_t test_count = 0;
    /// Mean of the input distribution; its length fixes the input dim.
    Eigen::VectorXd feature_shift;
    /// Magnitude of the domain's deviation from the shared labeling head.
    double concept_shift = 0.0;
    /// Standard deviation of additive label noise.
    double label_noise = 0.0;

    /// Throws InvalidSpec on an empty count, negative magnitudes, or a
    /// shift vector of the wrong length.
    void validate(Eigen::Index input_dim) const;
};

/// Fixed random map x -> tanh(W x + b). Never updated by training.
class FrozenBackbone {
public:
    FrozenBackbone(Eigen::Index input_dim, Eigen::Index feature_dim, std::uint64_t seed);

    Eigen::Index input_dim() const noexcept { return weights_.cols(); }
    Eigen::Index feature_dim() const noexcept { return weights_.rows(); }
    std::uint64_t seed() const noexcept { return seed_; }

    const Eigen::MatrixXd& weights() const noexcept { return weights_; }
    const Eigen::VectorXd& bias() const noexcept { return bias_; }

    /// Row-wise features for a sample-per-row input matrix.
    Eigen::MatrixXd features(const Eigen::MatrixXd& inputs) const;

private:
    Eigen::MatrixXd weights_;
    Eigen::VectorXd bias_;
    std::uint64_t seed_;
};

/// Samples as rows; `features` caches the backbone output for `inputs`.
struct DataSplit {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd features;
    Eigen::VectorXd labels;

    std::size_t size() const noexcept { return static_cast<std::size_t>(labels.size()); }
};

struct DomainDataset {
    int domain_id = 0;
    DataSplit train;
    DataSplit test;
};

/// Unit-norm labeling head shared by every domain.
Eigen::VectorXd shared_concept(Eigen::Index feature_dim, std::uint64_t shared_concept_seed);

/// Training-set size kept under a data fraction: round(n * fraction), at least 1.
std::size_t fraction_size(std::size_t sample_count, double fraction);

/// Draws x ~ N(shift, I) and y = w_d . phi(x) + noise with
/// w_d = w_shared + concept_shift * u_d, u_d a unit vector drawn from
/// domain_seed. Classification labels are 1 when the noisy score is positive.
///
/// The test split is drawn first and the full training set second, so a
/// smaller `train_fraction` keeps a prefix of the same training samples and
/// an identical test split.
DomainDataset generate_domain_dataset(const DomainSpec& spec, const FrozenBackbone& backbone,
                                      TaskKind task, std::uint64_t shared_concept_seed,
                                      std::uint64_t domain_seed, double train_fraction = 1.0);

/// CSV columns: domain_id, split, x_0..x_{d-1}, label.
void write_dataset_csv(std::ostream& os, const DomainDataset& data);

/// Linear head over backbone features: a 1 x feature_dim weight row and a bias.
LayerManifest decoder_manifest(Eigen::Index feature_dim);

// Losses over backbone features. The training objective for regression is
// half the mean squared error; for classification it is the mean logistic loss
// on labels in {0, 1}.

Eigen::VectorXd decoder_scores(const ParamVector& decoder, const Eigen::MatrixXd& features);

double training_objective(const ParamVector& decoder, const Eigen::MatrixXd& features,
                          const Eigen::VectorXd& labels, TaskKind task);

ParamVector training_gradient(const ParamVector& decoder, const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& labels, TaskKind task);

/// training_objective + (mu / 2) * |decoder - anchor|^2.
double proximal_objective(const ParamVector& decoder, const Eigen::MatrixXd& features,
                          const Eigen::VectorXd& labels, TaskKind task,
                          const ParamVector& anchor, double mu);

ParamVector proximal_gradient(const ParamVector& decoder, const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& labels, TaskKind task,
                              const ParamVector& anchor, double mu);

struct LocalConfig {
    std::size_t steps = 0;
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    double prox_mu = 0.01;
};

struct ClientState {
    DomainSpec domain;
    DomainDataset data;
    TaskKind task = TaskKind::Regression;
    std::shared_ptr<const FrozenBackbone> backbone;
    ParamVector decoder;
    /// Uploading client of the held decoder; empty when it came from aggregation.
    std::optional<std::size_t> received_from;
    LocalConfig local;
};

/// Mini-batch gradient descent on the client's training split. Batches walk a
/// fresh seeded permutation each epoch; a batch at least as large as the
/// split means full-batch steps. Throws NonFiniteLoss on divergence.
ParamVector local_train(const ParamVector& decoder, const ClientState& client,
                        std::uint64_t derived_seed);

/// local_train with the extra gradient term mu * (decoder - global_anchor).
ParamVector local_train_fedprox(const ParamVector& decoder, const ClientState& client,
                                const ParamVector& global_anchor, double mu,
                                std::uint64_t derived_seed);

struct EvalMetrics {
    /// Mean squared error, or mean logistic loss.
    double loss = 0.0;
    /// Fraction correct; classification only.
    std::optional<double> accuracy;
};

EvalMetrics evaluate(const ParamVector& decoder, const ClientState& client);

EvalMetrics evaluate_split(const ParamVector& decoder, const DataSplit& split, TaskKind task);

/// w_i = |train_i| / sum_j |train_j|.
AggregationWeights training_weights(std::span<const ClientState> clients);

/// w_i = n_i / sum_j n_j from the domain specs.
AggregationWeights spec_weights(std::span<const DomainSpec> specs);

}  // namespace fedx

#endif  // FEDX_CLIENTS_HPP
