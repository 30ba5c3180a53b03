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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedx/harness.hpp"

namespace fs = std::filesystem;
using fedx::Strategy;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fedx_harness_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n' ? 1 : 0;
    return n;
}

fedx::ExperimentConfig tiny(const fs::path& out) {
    json j = {{"rounds", 4},
              {"aggregation_frequency", 2},
              {"warmup_rounds", 1},
              {"input_dim", 3},
              {"feature_dim", 6},
              {"strategies", {"clustered", "fedavg_only"}},
              {"seeds", {0, 1, 2}},
              {"local", {{"epochs", 1.0}, {"batch_size", 16}}},
              {"domains",
               {{{"id", 0}, {"sample_count", 100}, {"test_count", 50}, {"feature_shift", 0.0},
                 {"concept_shift", 0.2}, {"label_noise", 0.1}},
                {{"id", 1}, {"sample_count", 60}, {"test_count", 50}, {"feature_shift", 0.5},
                 {"concept_shift", 0.2}, {"label_noise", 0.1}},
                {{"id", 2}, {"sample_count", 40}, {"test_count", 50}, {"feature_shift", 2.0},
                 {"concept_shift", 1.0}, {"label_noise", 0.1}}}},
              {"output_dir", out.string()}};
    return fedx::config_from_json(j);
}

fedx::RunSummary summary(Strategy s, std::uint64_t seed, double loss, const std::string& fp = "abc") {
    fedx::RunSummary out;
    out.key = {s, 2, 1.0, seed};
    out.rounds = 4;
    out.config_fingerprint = fp;
    out.final_avg_loss = loss;
    out.worst_domain_loss = loss;
    return out;
}

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("round trip") {
        const auto cfg = tiny("out");
        const auto back = fedx::config_from_json(fedx::config_to_json(cfg));
        CHECK(fedx::config_to_json(back) == fedx::config_to_json(cfg));
        CHECK(back.fingerprint() == cfg.fingerprint());
        CHECK(back.domains.size() == 3);
    }
    SUBCASE("scalar shift becomes a vector of that norm") {
        const auto cfg = tiny("out");
        CHECK(cfg.domains[2].feature_shift.size() == 3);
        CHECK(cfg.domains[2].feature_shift.norm() == doctest::Approx(2.0));
        CHECK(cfg.domains[0].feature_shift.norm() == 0.0);
    }
    SUBCASE("defaults") {
        const auto cfg = fedx::ExperimentConfig::defaults();
        CHECK_NOTHROW(cfg.validate());
        CHECK(cfg.domains.size() == 4);
        CHECK(cfg.domains[3].sample_count < cfg.domains[0].sample_count);
        CHECK(cfg.local.steps_for(2000) == 313);
    }
    SUBCASE("invalid values") {
        CHECK_THROWS_AS(fedx::config_from_json(json{{"strategies", {"fedbuff"}}}), fedx::ConfigInvalid);
        CHECK_THROWS_AS(fedx::config_from_json(json{{"data_fractions", {0.0}}}).validate(),
                        fedx::ConfigInvalid);
        CHECK_THROWS_AS(fedx::config_from_json(json{{"data_fractions", {1.5}}}).validate(),
                        fedx::ConfigInvalid);
        CHECK_THROWS_AS(fedx::config_from_json(json{{"seeds", json::array()}}).validate(), fedx::ConfigInvalid);
        CHECK_THROWS_AS(fedx::config_from_json(json{{"rounds", 5}}).validate(), fedx::ConfigInvalid);
        CHECK_THROWS_AS(fedx::config_from_json(json{{"rounds", "forty"}}), fedx::ConfigInvalid);
        CHECK_THROWS_AS(fedx::load_config("/nonexistent/fedx.json"), fedx::IoError);
    }
}

TEST_CASE("experiment output layout and determinism") {
    const fs::path dir = scratch_dir("layout");
    auto cfg = tiny(dir);
    const auto result = fedx::run_experiment(cfg);
    REQUIRE(result.summaries.size() == 6);
    REQUIRE(result.comparison.has_value());
    CHECK(result.comparison->rows.size() == 2);

    int csvs = 0, summaries = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        csvs += e.path().filename() == "metrics.csv" ? 1 : 0;
        summaries += e.path().filename() == "summary.json" ? 1 : 0;
    }
    CHECK(csvs == 6);
    CHECK(summaries == 6);
    CHECK(fs::exists(dir / "comparison.json"));
    CHECK(fs::exists(dir / "comparison.txt"));
    CHECK(fs::exists(dir / "config.json"));

    const fs::path cell = dir / "cells" / "clustered_T2_f1_s0";
    REQUIRE(fs::exists(cell / "metrics.csv"));
    const std::string csv = slurp(cell / "metrics.csv");
    CHECK(count_lines(csv) == 1 + 4 + 1);
    CHECK(csv.rfind("round,decision,domain_0_loss,domain_1_loss,domain_2_loss,avg_loss,std_loss\n", 0) == 0);
    CHECK(count_lines(slurp(cell / "trace.jsonl")) == 4);
    CHECK_FALSE(fs::exists(cell / "clustering.log"));

    const fs::path again = scratch_dir("layout_again");
    cfg.output_dir = again;
    fedx::run_experiment(cfg);
    for (const auto& name : {"clustered_T2_f1_s0", "fedavg_only_T1_f1_s2"}) {
        CHECK(slurp(dir / "cells" / name / "metrics.csv") == slurp(again / "cells" / name / "metrics.csv"));
        CHECK(slurp(dir / "cells" / name / "trace.jsonl") == slurp(again / "cells" / name / "trace.jsonl"));
    }

    const auto loaded = fedx::load_summaries(dir);
    CHECK(loaded.size() == 6);
    const auto table = fedx::compare_directory(dir);
    CHECK(table.rows.size() == 2);
    CHECK(table.seeds == std::vector<std::uint64_t>{0, 1, 2});

    fs::remove_all(dir);
    fs::remove_all(again);
}

TEST_CASE("summaries are consistent with the trace") {
    auto cfg = tiny("unused");
    cfg.task = fedx::TaskKind::Classification;
    const auto cell = fedx::run_cell(cfg, {Strategy::Clustered, 2, 1.0, 4});
    const auto& last = cell.trace.rounds.back();
    std::vector<double> losses;
    for (const auto& m : last.domain_metrics) losses.push_back(m.loss);
    double mean = 0.0;
    for (double l : losses) mean += l / losses.size();
    double var = 0.0;
    for (double l : losses) var += (l - mean) * (l - mean) / losses.size();
    CHECK(std::abs(cell.summary.final_std_loss - std::sqrt(var)) <= 1e-9);
    CHECK(std::abs(cell.summary.final_avg_loss - mean) <= 1e-12);
    CHECK(cell.summary.worst_domain_loss == *std::max_element(losses.begin(), losses.end()));
    REQUIRE(cell.summary.final_avg_accuracy.has_value());
    CHECK(*cell.summary.worst_domain_accuracy <= *cell.summary.final_avg_accuracy);

    const auto back = fedx::summary_from_json(fedx::summary_to_json(cell.summary));
    CHECK(back.key.name() == cell.summary.key.name());
    CHECK(back.final_avg_loss == cell.summary.final_avg_loss);
    CHECK(back.train_sizes == cell.summary.train_sizes);

    std::ostringstream os;
    fedx::write_metrics_csv(os, cell.trace);
    CHECK(os.str().find("avg_accuracy,std_accuracy") != std::string::npos);
}

TEST_CASE("data fraction sets train sizes") {
    auto cfg = tiny("unused");
    const auto clients = fedx::make_federation(cfg, 0.1, 0);
    CHECK(clients[0].data.train.size() == 10);
    CHECK(clients[1].data.train.size() == 6);
    CHECK(clients[2].data.train.size() == 4);
    const auto full = fedx::make_federation(cfg, 1.0, 0);
    CHECK(full[0].data.test.labels == clients[0].data.test.labels);
    CHECK(full[0].local.steps == 7);
}

TEST_CASE("T equal to R aggregates exactly once") {
    auto cfg = tiny("unused");
    const auto cell = fedx::run_cell(cfg, {Strategy::Clustered, 4, 1.0, 0});
    int aggregates = 0;
    for (const auto& r : cell.trace.rounds) aggregates += r.decision == fedx::Decision::Aggregate ? 1 : 0;
    CHECK(aggregates == 1);
    CHECK(cell.trace.rounds.back().decision == fedx::Decision::Aggregate);
}

TEST_CASE("debug clustering log") {
    const fs::path dir = scratch_dir("debug");
    auto cfg = tiny(dir);
    cfg.debug_clustering = true;
    const auto cell = fedx::run_cell(cfg, {Strategy::Clustered, 2, 1.0, 0});
    const fs::path cell_dir = fedx::write_cell(cfg, cell, dir);
    const std::string log = slurp(cell_dir / "clustering.log");
    CHECK(log.find("round 1") != std::string::npos);
    CHECK(log.find("round 3") != std::string::npos);
    CHECK(log.find("linkage=") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("comparison table") {
    SUBCASE("ranking with ties") {
        std::vector<fedx::RunSummary> s;
        for (std::uint64_t seed : {0, 1}) {
            s.push_back(summary(Strategy::Clustered, seed, 1.0));
            s.push_back(summary(Strategy::Random, seed, 1.0));
            s.push_back(summary(Strategy::FedAvgOnly, seed, 2.0));
        }
        const auto table = fedx::compare_strategies(s);
        REQUIRE(table.rows.size() == 3);
        CHECK(table.rows[0].rank == 1);
        CHECK(table.rows[1].rank == 1);
        CHECK(table.rows[2].rank == 3);
        CHECK(table.rows[2].strategy == Strategy::FedAvgOnly);
        CHECK(fedx::comparison_to_text(table).find("fedavg_only") != std::string::npos);
        CHECK(fedx::comparison_to_json(table).at("rows").size() == 3);
    }
    SUBCASE("three strategies over ten seeds") {
        std::vector<fedx::RunSummary> s;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            s.push_back(summary(Strategy::Clustered, seed, 1.0 + 0.01 * seed));
            s.push_back(summary(Strategy::Random, seed, 1.2));
            s.push_back(summary(Strategy::FedAvgOnly, seed, 1.1));
        }
        const auto table = fedx::compare_strategies(s);
        REQUIRE(table.rows.size() == 3);
        CHECK(table.rows[0].strategy == Strategy::Clustered);
        CHECK(table.rows[0].runs == 10);
        CHECK(table.rows[0].mean_final_avg_loss == doctest::Approx(1.045));
    }
    SUBCASE("mismatched seeds") {
        std::vector<fedx::RunSummary> s{summary(Strategy::Clustered, 0, 1.0), summary(Strategy::Clustered, 1, 1.0),
                                        summary(Strategy::Random, 0, 1.0)};
        CHECK_THROWS_AS(fedx::compare_strategies(s), fedx::MismatchedSeeds);
    }
    SUBCASE("mixed configurations") {
        std::vector<fedx::RunSummary> s{summary(Strategy::Clustered, 0, 1.0),
                                        summary(Strategy::Random, 0, 1.0, "other")};
        CHECK_THROWS_AS(fedx::compare_strategies(s), fedx::ConfigInvalid);
    }
    SUBCASE("a single group cannot be compared") {
        std::vector<fedx::RunSummary> s{summary(Strategy::Clustered, 0, 1.0)};
        CHECK_THROWS_AS(fedx::compare_strategies(s), fedx::ConfigInvalid);
    }
}

TEST_CASE("ablation over T") {
    const fs::path dir = scratch_dir("ablation");
    auto cfg = tiny(dir);
    cfg.seeds = {0};

    auto bad = cfg;
    bad.server.rounds = 100;
    CHECK_THROWS_AS(fedx::ablation_T(bad, {2, 7}), fedx::ConfigInvalid);
    CHECK_FALSE(fs::exists(dir / "ablation_t.json"));

    cfg.server.rounds = 100;
    cfg.server.warmup_rounds = 0;
    const auto rows = fedx::ablation_T(cfg, {2, 5, 10, 50});
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].aggregation_frequency == 2);
    CHECK(rows[3].aggregation_frequency == 50);
    for (const auto& r : rows) CHECK(r.runs == 1);
    CHECK(fs::exists(dir / "ablation_t.json"));
    CHECK(fs::exists(dir / "ablation_t.txt"));
    CHECK(fs::exists(dir / "cells" / "clustered_T50_f1_s0" / "metrics.csv"));
    fs::remove_all(dir);
}
