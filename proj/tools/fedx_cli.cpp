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

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedx/harness.hpp"

namespace {

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const int value = std::stoi(item, &used);
        if (used != item.size()) {
            throw fedx::ConfigInvalid("bad integer '" + item + "' in list");
        }
        out.push_back(value);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedx: federated decoder exchange simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string strategy;
    int agg_frequency = 0;
    int rounds = 0;
    double data_fraction = 0.0;
    bool debug_clustering = false;

    auto* run = app.add_subcommand("run", "run every (strategy, seed, fraction) cell of a config");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    auto* seed_opt = run->add_option("--seed", seed, "run a single seed");
    auto* out_opt = run->add_option("--out", out_dir, "output directory");
    auto* strategy_opt = run->add_option("--strategy", strategy, "run a single strategy");
    auto* t_opt = run->add_option("--agg-frequency", agg_frequency, "aggregation frequency T");
    auto* rounds_opt = run->add_option("--rounds", rounds, "protocol rounds R");
    auto* fraction_opt = run->add_option("--data-fraction", data_fraction, "training data fraction");
    run->add_flag("--debug-clustering", debug_clustering, "write clustering.log per cell");

    std::string in_dir;
    auto* compare = app.add_subcommand("compare", "rebuild the comparison table from summaries");
    compare->add_option("--in", in_dir, "directory holding summary.json files")->required();

    std::string ablate_config;
    std::string t_values = "2,5,10,50";
    std::string ablate_out;
    auto* ablate = app.add_subcommand("ablate-t", "clustered strategy across aggregation frequencies");
    ablate->add_option("--config", ablate_config, "experiment config (JSON)")->required();
    ablate->add_option("--t-values", t_values, "comma-separated T values");
    auto* ablate_out_opt = ablate->add_option("--out", ablate_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            fedx::ExperimentConfig cfg = fedx::load_config(config_path);
            if (*seed_opt) cfg.seeds = {seed};
            if (*out_opt) cfg.output_dir = out_dir;
            if (*strategy_opt) cfg.strategies = {fedx::parse_strategy(strategy)};
            if (*t_opt) cfg.server.aggregation_frequency = agg_frequency;
            if (*rounds_opt) cfg.server.rounds = rounds;
            if (*fraction_opt) cfg.data_fractions = {data_fraction};
            if (debug_clustering) cfg.debug_clustering = true;
            const fedx::ExperimentResult result = fedx::run_experiment(cfg);
            std::cout << "wrote " << result.summaries.size() << " runs to " << cfg.output_dir.string()
                      << '\n';
            if (result.comparison) {
                std::cout << fedx::comparison_to_text(*result.comparison);
            }
        } else if (*compare) {
            const fedx::ComparisonTable table = fedx::compare_directory(in_dir);
            std::cout << fedx::comparison_to_text(table);
        } else if (*ablate) {
            fedx::ExperimentConfig cfg = fedx::load_config(ablate_config);
            if (*ablate_out_opt) cfg.output_dir = ablate_out;
            fedx::ablation_T(cfg, parse_int_list(t_values));
            std::ifstream table(cfg.output_dir / "ablation_t.txt");
            std::cout << table.rdbuf();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return EXIT_FAILURE;
    }
    return EXIT_SUCCESS;
}
