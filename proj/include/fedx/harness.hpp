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

#ifndef FEDX_HARNESS_HPP
#define FEDX_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedx/clients.hpp"
#include "fedx/server.hpp"

namespace fedx {

/// Local optimizer settings; steps per round are derived from `epochs`.
struct LocalSchedule {
    double epochs = 5.0;
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    double prox_mu = 0.01;

    /// ceil(epochs * train_size / batch_size).
    std::size_t steps_for(std::size_t train_size) const;
};

struct ExperimentConfig {
    /// rounds, aggregation_frequency and warmup_rounds apply to every cell;
    /// strategy and master_seed are set per cell.
    ServerConfig server;
    TaskKind task = TaskKind::Regression;
    Eigen::Index input_dim = 8;
    Eigen::Index feature_dim = 32;
    std::vector<DomainSpec> domains;
    std::vector<Strategy> strategies;
    std::vector<std::uint64_t> seeds;
    std::vector<double> data_fractions{1.0};
    LocalSchedule local;
    std::filesystem::path output_dir = "runs";
    bool debug_clustering = false;

    /// Desk-scale four-domain setup; domain 3 is small and strongly shifted.
    static ExperimentConfig defaults();

    /// Throws ConfigInvalid on an empty seed, strategy or domain list, a
    /// fraction outside (0, 1], or R not a multiple of T for an exchanging
    /// strategy.
    void validate() const;

    /// Hex digest of everything that must match for two runs to be
    /// comparable: task, dims, domains, local schedule, rounds and warm-up.
    std::string fingerprint() const;
};

/// Reads a config; keys missing from the file keep their defaults().
/// `feature_shift` may be an array or a scalar magnitude, in which case the
/// direction is a unit vector seeded by the domain id.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Builds the clients for one seed: shared backbone and concept, one
/// dataset per domain, local steps from the schedule.
std::vector<ClientState> make_federation(const ExperimentConfig& cfg, double data_fraction,
                                         std::uint64_t seed);

struct CellKey {
    Strategy strategy = Strategy::Clustered;
    int aggregation_frequency = 1;
    double data_fraction = 1.0;
    std::uint64_t seed = 0;

    /// Directory name, e.g. "clustered_T2_f0.5_s3".
    std::string name() const;
};

struct RunSummary {
    CellKey key;
    int rounds = 0;
    int warmup_rounds = 0;
    TaskKind task = TaskKind::Regression;
    std::string config_fingerprint;
    std::vector<std::size_t> train_sizes;
    std::vector<EvalMetrics> final_domain_metrics;
    double final_avg_loss = 0.0;
    double final_std_loss = 0.0;
    double worst_domain_loss = 0.0;
    std::optional<double> final_avg_accuracy;
    std::optional<double> worst_domain_accuracy;
};

nlohmann::json summary_to_json(const RunSummary& s);
RunSummary summary_from_json(const nlohmann::json& j);

struct CellResult {
    RunSummary summary;
    SimulationTrace trace;
};

/// One simulation; no file output.
CellResult run_cell(const ExperimentConfig& cfg, const CellKey& key);

/// Per-round metrics CSV: round, decision, domain_<i>_loss..., avg_loss,
/// std_loss, then accuracy columns for classification. Warm-up rows come
/// first with decision "warmup".
void write_metrics_csv(std::ostream& os, const SimulationTrace& trace);

/// One JSON object per round: decision, cluster index list, plan.
void write_trace_jsonl(std::ostream& os, const SimulationTrace& trace);

/// Writes metrics.csv, summary.json and trace.jsonl (plus clustering.log
/// when requested) under dir / key.name().
std::filesystem::path write_cell(const ExperimentConfig& cfg, const CellResult& cell,
                                 const std::filesystem::path& dir);

struct ComparisonRow {
    Strategy strategy = Strategy::Clustered;
    int aggregation_frequency = 1;
    double data_fraction = 1.0;
    std::vector<std::size_t> train_sizes;
    std::size_t runs = 0;
    double mean_final_avg_loss = 0.0;
    double mean_worst_domain_loss = 0.0;
    double mean_final_std_loss = 0.0;
    std::optional<double> mean_final_avg_accuracy;
    /// 1 is best (lowest mean average loss); equal means share a rank.
    int rank = 0;
};

struct ComparisonTable {
    std::string config_fingerprint;
    std::vector<std::uint64_t> seeds;
    std::vector<ComparisonRow> rows;
};

/// Groups summaries by (strategy, T, fraction) and averages over seeds.
/// Throws ConfigInvalid with fewer than two groups or mixed fingerprints,
/// MismatchedSeeds when groups cover different seed sets.
ComparisonTable compare_strategies(const std::vector<RunSummary>& summaries);

nlohmann::json comparison_to_json(const ComparisonTable& table);
std::string comparison_to_text(const ComparisonTable& table);

struct ExperimentResult {
    std::vector<RunSummary> summaries;
    std::optional<ComparisonTable> comparison;
};

/// Runs every (strategy, seed, fraction) cell and writes per-cell files plus
/// comparison.json / comparison.txt when at least two groups exist.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Reads every summary.json below `dir`.
std::vector<RunSummary> load_summaries(const std::filesystem::path& dir);

/// Writes comparison.json and comparison.txt into `dir`.
ComparisonTable compare_directory(const std::filesystem::path& dir);

struct AblationRow {
    int aggregation_frequency = 1;
    std::size_t runs = 0;
    double mean_final_avg_loss = 0.0;
    double mean_worst_domain_loss = 0.0;
    double mean_final_std_loss = 0.0;
};

/// Clustered strategy once per T and seed at the first configured fraction.
/// Writes cells plus ablation_t.json / ablation_t.txt. Every T must divide R.
std::vector<AblationRow> ablation_T(const ExperimentConfig& cfg, const std::vector<int>& t_values);

}  // namespace fedx

#endif  // FEDX_HARNESS_HPP
