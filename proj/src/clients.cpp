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

#include "fedx/clients.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace fedx {

std::string_view to_string(TaskKind t) noexcept {
    return t == TaskKind::Regression ? "regression" : "classification";
}

TaskKind parse_task(std::string_view name) {
    if (name == "regression") return TaskKind::Regression;
    if (name == "classification") return TaskKind::Classification;
    throw InvalidSpec("unknown task '" + std::string(name) + "'");
}

void DomainSpec::validate(Eigen::Index input_dim) const {
    if (sample_count < 1) {
        throw InvalidSpec("domain " + std::to_string(domain_id) + ": sample_count must be >= 1");
    }
    if (test_count < 1) {
        throw InvalidSpec("domain " + std::to_string(domain_id) + ": test_count must be >= 1");
    }
    if (!(concept_shift >= 0.0) || !std::isfinite(concept_shift)) {
        throw InvalidSpec("domain " + std::to_string(domain_id) + ": concept_shift must be >= 0");
    }
    if (!(label_noise >= 0.0) || !std::isfinite(label_noise)) {
        throw InvalidSpec("domain " + std::to_string(domain_id) + ": label_noise must be >= 0");
    }
    if (feature_shift.size() != input_dim) {
        throw InvalidSpec("domain " + std::to_string(domain_id) + ": feature_shift has length " +
                          std::to_string(feature_shift.size()) + ", expected " +
                          std::to_string(input_dim));
    }
    if (!feature_shift.allFinite()) {
        throw InvalidSpec("domain " + std::to_string(domain_id) + ": non-finite feature_shift");
    }
}

namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev,
                                std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, stddev);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = normal(rng);
        }
    }
    return m;
}

Eigen::VectorXd unit_vector(Eigen::Index dim, std::mt19937_64& rng) {
    Eigen::VectorXd v = gaussian_matrix(dim, 1, 1.0, rng);
    const double norm = v.norm();
    if (norm == 0.0) {
        v = Eigen::VectorXd::Unit(dim, 0);
    } else {
        v /= norm;
    }
    return v;
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

DataSplit draw_split(std::size_t count, const DomainSpec& spec, const FrozenBackbone& backbone,
                     const Eigen::VectorXd& head, TaskKind task, std::mt19937_64& rng) {
    const auto n = static_cast<Eigen::Index>(count);
    DataSplit split;
    split.inputs = gaussian_matrix(n, backbone.input_dim(), 1.0, rng);
    split.inputs.rowwise() += spec.feature_shift.transpose();
    split.features = backbone.features(split.inputs);
    Eigen::VectorXd scores = split.features * head;
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        scores(i) += spec.label_noise * noise(rng);
    }
    if (task == TaskKind::Regression) {
        split.labels = std::move(scores);
    } else {
        split.labels = (scores.array() > 0.0).cast<double>();
    }
    return split;
}

void check_decoder(const ParamVector& decoder, const Eigen::MatrixXd& features) {
    if (decoder.size() != features.cols() + 1) {
        throw ManifestMismatch("decoder of dim " + std::to_string(decoder.size()) +
                               " against " + std::to_string(features.cols()) + " features");
    }
}

}  // namespace

FrozenBackbone::FrozenBackbone(Eigen::Index input_dim, Eigen::Index feature_dim,
                               std::uint64_t seed)
    : seed_(seed) {
    if (input_dim < 1 || feature_dim < 1) {
        throw InvalidSpec("backbone dims must be >= 1");
    }
    std::mt19937_64 rng(seed);
    weights_ = gaussian_matrix(feature_dim, input_dim, 1.0 / std::sqrt(double(input_dim)), rng);
    bias_ = gaussian_matrix(feature_dim, 1, 0.5, rng);
}

Eigen::MatrixXd FrozenBackbone::features(const Eigen::MatrixXd& inputs) const {
    if (inputs.cols() != input_dim()) {
        throw DimensionMismatch("backbone expects " + std::to_string(input_dim()) +
                                " inputs, got " + std::to_string(inputs.cols()));
    }
    Eigen::MatrixXd pre = inputs * weights_.transpose();
    pre.rowwise() += bias_.transpose();
    return pre.array().tanh().matrix();
}

Eigen::VectorXd shared_concept(Eigen::Index feature_dim, std::uint64_t shared_concept_seed) {
    std::mt19937_64 rng(shared_concept_seed);
    return unit_vector(feature_dim, rng);
}

std::size_t fraction_size(std::size_t sample_count, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw InvalidSpec("data fraction must be in (0, 1]");
    }
    const auto kept = static_cast<std::size_t>(std::llround(double(sample_count) * fraction));
    return std::max<std::size_t>(1, std::min(kept, sample_count));
}

DomainDataset generate_domain_dataset(const DomainSpec& spec, const FrozenBackbone& backbone,
                                      TaskKind task, std::uint64_t shared_concept_seed,
                                      std::uint64_t domain_seed, double train_fraction) {
    spec.validate(backbone.input_dim());
    const std::size_t train_size = fraction_size(spec.sample_count, train_fraction);

    std::mt19937_64 rng(domain_seed);
    const Eigen::VectorXd direction = unit_vector(backbone.feature_dim(), rng);
    const Eigen::VectorXd head =
        shared_concept(backbone.feature_dim(), shared_concept_seed) + spec.concept_shift * direction;

    DomainDataset data;
    data.domain_id = spec.domain_id;
    data.test = draw_split(spec.test_count, spec, backbone, head, task, rng);
    DataSplit full = draw_split(spec.sample_count, spec, backbone, head, task, rng);
    const auto keep = static_cast<Eigen::Index>(train_size);
    data.train.inputs = full.inputs.topRows(keep);
    data.train.features = full.features.topRows(keep);
    data.train.labels = full.labels.head(keep);
    return data;
}

void write_dataset_csv(std::ostream& os, const DomainDataset& data) {
    const Eigen::Index dim = data.train.inputs.cols();
    os << "domain_id,split";
    for (Eigen::Index k = 0; k < dim; ++k) {
        os << ",x_" << k;
    }
    os << ",label\n";
    char buf[32];
    auto put = [&](double v) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        os << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    };
    for (const auto* split : {&data.train, &data.test}) {
        const char* name = split == &data.train ? "train" : "test";
        for (Eigen::Index i = 0; i < split->inputs.rows(); ++i) {
            os << data.domain_id << ',' << name;
            for (Eigen::Index k = 0; k < dim; ++k) {
                put(split->inputs(i, k));
            }
            put(split->labels(i));
            os << '\n';
        }
    }
}

LayerManifest decoder_manifest(Eigen::Index feature_dim) {
    return LayerManifest({{"weight", 1, feature_dim}, {"bias", 1, 1}});
}

Eigen::VectorXd decoder_scores(const ParamVector& decoder, const Eigen::MatrixXd& features) {
    check_decoder(decoder, features);
    const Eigen::Index fd = features.cols();
    Eigen::VectorXd z = features * decoder.head(fd);
    z.array() += decoder(fd);
    return z;
}

double training_objective(const ParamVector& decoder, const Eigen::MatrixXd& features,
                          const Eigen::VectorXd& labels, TaskKind task) {
    const Eigen::VectorXd z = decoder_scores(decoder, features);
    const double n = static_cast<double>(labels.size());
    if (task == TaskKind::Regression) {
        return 0.5 * (z - labels).squaredNorm() / n;
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        sum += softplus(z(i)) - labels(i) * z(i);
    }
    return sum / n;
}

ParamVector training_gradient(const ParamVector& decoder, const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& labels, TaskKind task) {
    const Eigen::VectorXd z = decoder_scores(decoder, features);
    Eigen::VectorXd residual(z.size());
    if (task == TaskKind::Regression) {
        residual = z - labels;
    } else {
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            residual(i) = sigmoid(z(i)) - labels(i);
        }
    }
    const double n = static_cast<double>(labels.size());
    const Eigen::Index fd = features.cols();
    ParamVector grad(fd + 1);
    grad.head(fd).noalias() = features.transpose() * residual / n;
    grad(fd) = residual.sum() / n;
    return grad;
}

double proximal_objective(const ParamVector& decoder, const Eigen::MatrixXd& features,
                          const Eigen::VectorXd& labels, TaskKind task,
                          const ParamVector& anchor, double mu) {
    return training_objective(decoder, features, labels, task) +
           0.5 * mu * (decoder - anchor).squaredNorm();
}

ParamVector proximal_gradient(const ParamVector& decoder, const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& labels, TaskKind task,
                              const ParamVector& anchor, double mu) {
    return training_gradient(decoder, features, labels, task) + mu * (decoder - anchor);
}

namespace {

ParamVector run_local_steps(const ParamVector& decoder, const ClientState& client,
                            const ParamVector* anchor, double mu, std::uint64_t seed) {
    const DataSplit& train = client.data.train;
    check_decoder(decoder, train.features);
    if (train.size() == 0) {
        throw EmptyInput("client " + std::to_string(client.domain.domain_id) +
                         " has an empty training split");
    }
    const LocalConfig& cfg = client.local;
    if (cfg.steps == 0) {
        return decoder;
    }
    if (cfg.batch_size == 0) {
        throw ConfigInvalid("batch_size must be >= 1");
    }

    ParamVector theta = decoder;
    const std::size_t n = train.size();
    const bool full_batch = cfg.batch_size >= n;
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::size_t cursor = n;
    std::vector<Eigen::Index> batch;

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        ParamVector grad;
        if (full_batch) {
            grad = training_gradient(theta, train.features, train.labels, client.task);
        } else {
            if (cursor + cfg.batch_size > n) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                         order.begin() + static_cast<std::ptrdiff_t>(cursor + cfg.batch_size));
            cursor += cfg.batch_size;
            const Eigen::MatrixXd features = train.features(batch, Eigen::all);
            const Eigen::VectorXd labels = train.labels(batch);
            grad = training_gradient(theta, features, labels, client.task);
        }
        if (anchor != nullptr) {
            grad += mu * (theta - *anchor);
        }
        theta -= cfg.learning_rate * grad;
        if (!theta.allFinite()) {
            throw NonFiniteLoss("client " + std::to_string(client.domain.domain_id) +
                                " diverged at local step " + std::to_string(step) +
                                " (learning rate " + std::to_string(cfg.learning_rate) + ")");
        }
    }
    return theta;
}

}  // namespace

ParamVector local_train(const ParamVector& decoder, const ClientState& client,
                        std::uint64_t derived_seed) {
    return run_local_steps(decoder, client, nullptr, 0.0, derived_seed);
}

ParamVector local_train_fedprox(const ParamVector& decoder, const ClientState& client,
                                const ParamVector& global_anchor, double mu,
                                std::uint64_t derived_seed) {
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw ConfigInvalid("proximal mu must be >= 0");
    }
    if (global_anchor.size() != decoder.size()) {
        throw DimensionMismatch("proximal anchor dim differs from decoder dim");
    }
    return run_local_steps(decoder, client, &global_anchor, mu, derived_seed);
}

EvalMetrics evaluate_split(const ParamVector& decoder, const DataSplit& split, TaskKind task) {
    if (split.size() == 0) {
        throw EmptyInput("evaluation split is empty");
    }
    const Eigen::VectorXd z = decoder_scores(decoder, split.features);
    const double n = static_cast<double>(split.size());
    EvalMetrics m;
    if (task == TaskKind::Regression) {
        m.loss = (z - split.labels).squaredNorm() / n;
        return m;
    }
    double sum = 0.0;
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        sum += softplus(z(i)) - split.labels(i) * z(i);
        const double predicted = z(i) > 0.0 ? 1.0 : 0.0;
        correct += predicted == split.labels(i) ? 1 : 0;
    }
    m.loss = sum / n;
    m.accuracy = static_cast<double>(correct) / n;
    return m;
}

EvalMetrics evaluate(const ParamVector& decoder, const ClientState& client) {
    return evaluate_split(decoder, client.data.test, client.task);
}

AggregationWeights training_weights(std::span<const ClientState> clients) {
    std::vector<std::size_t> counts;
    counts.reserve(clients.size());
    for (const auto& c : clients) {
        counts.push_back(c.data.train.size());
    }
    return AggregationWeights::from_sample_counts(counts);
}

AggregationWeights spec_weights(std::span<const DomainSpec> specs) {
    std::vector<std::size_t> counts;
    counts.reserve(specs.size());
    for (const auto& s : specs) {
        counts.push_back(s.sample_count);
    }
    return AggregationWeights::from_sample_counts(counts);
}

}  // namespace fedx
