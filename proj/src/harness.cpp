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

#include "fedx/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "fedx/seed.hpp"

namespace fedx {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t LocalSchedule::steps_for(std::size_t train_size) const {
    if (batch_size == 0) {
        throw ConfigInvalid("batch_size must be >= 1");
    }
    const double steps = std::ceil(epochs * double(train_size) / double(batch_size));
    return static_cast<std::size_t>(std::max(0.0, steps));
}

namespace {

// Unit direction for a scalar feature shift; depends only on the domain id.
Eigen::VectorXd shift_direction(int domain_id, Eigen::Index input_dim) {
    std::mt19937_64 rng(mix64(0x5f3759dfULL + static_cast<std::uint64_t>(domain_id)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd v(input_dim);
    for (Eigen::Index k = 0; k < input_dim; ++k) v(k) = normal(rng);
    return v / v.norm();
}

DomainSpec make_domain(int id, std::size_t n, double shift, double concept_shift, double noise,
                       Eigen::Index input_dim) {
    DomainSpec d;
    d.domain_id = id;
    d.sample_count = n;
    d.test_count = 1000;
    d.feature_shift = shift * shift_direction(id, input_dim);
    d.concept_shift = concept_shift;
    d.label_noise = noise;
    return d;
}

std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    os << contents;
    if (!os) {
        throw IoError("failed writing " + path.string());
    }
}

json domain_to_json(const DomainSpec& d) {
    return json{{"id", d.domain_id},
                {"sample_count", d.sample_count},
                {"test_count", d.test_count},
                {"feature_shift", std::vector<double>(d.feature_shift.begin(), d.feature_shift.end())},
                {"concept_shift", d.concept_shift},
                {"label_noise", d.label_noise}};
}

DomainSpec domain_from_json(const json& j, Eigen::Index input_dim) {
    DomainSpec d;
    d.domain_id = j.at("id").get<int>();
    d.sample_count = j.at("sample_count").get<std::size_t>();
    d.test_count = j.value("test_count", std::size_t{1000});
    const json& shift = j.value("feature_shift", json(0.0));
    if (shift.is_number()) {
        d.feature_shift = shift.get<double>() * shift_direction(d.domain_id, input_dim);
    } else {
        const auto v = shift.get<std::vector<double>>();
        d.feature_shift = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    d.concept_shift = j.value("concept_shift", 0.0);
    d.label_noise = j.value("label_noise", 0.0);
    return d;
}

json metrics_to_json(const EvalMetrics& m) {
    json j{{"loss", m.loss}};
    if (m.accuracy) j["accuracy"] = *m.accuracy;
    return j;
}

EvalMetrics metrics_from_json(const json& j) {
    EvalMetrics m;
    m.loss = j.at("loss").get<double>();
    if (j.contains("accuracy")) m.accuracy = j.at("accuracy").get<double>();
    return m;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig cfg;
    cfg.server.rounds = 40;
    cfg.server.aggregation_frequency = 2;
    cfg.server.warmup_rounds = 5;
    cfg.server.strategy = Strategy::Clustered;
    cfg.task = TaskKind::Regression;
    cfg.input_dim = 8;
    cfg.feature_dim = 32;
    cfg.domains = {
        make_domain(0, 2000, 0.0, 0.3, 0.1, cfg.input_dim),
        make_domain(1, 2000, 0.5, 0.3, 0.1, cfg.input_dim),
        make_domain(2, 2000, 0.5, 0.3, 0.1, cfg.input_dim),
        make_domain(3, 500, 2.0, 1.0, 0.1, cfg.input_dim),
    };
    cfg.strategies = {Strategy::Clustered, Strategy::FedAvgOnly};
    cfg.seeds = {0, 1, 2};
    cfg.data_fractions = {1.0};
    cfg.output_dir = "runs";
    return cfg;
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigInvalid("at least one seed is required");
    if (strategies.empty()) throw ConfigInvalid("at least one strategy is required");
    if (domains.size() < 2) throw ConfigInvalid("at least two domains are required");
    if (data_fractions.empty()) throw ConfigInvalid("at least one data fraction is required");
    for (double f : data_fractions) {
        if (!(f > 0.0 && f <= 1.0)) {
            throw ConfigInvalid("data fraction " + format_double(f) + " outside (0, 1]");
        }
    }
    if (input_dim < 1 || feature_dim < 1) throw ConfigInvalid("dims must be >= 1");
    if (!(local.learning_rate > 0.0)) throw ConfigInvalid("learning_rate must be > 0");
    if (!(local.epochs >= 0.0)) throw ConfigInvalid("epochs must be >= 0");
    if (local.batch_size == 0) throw ConfigInvalid("batch_size must be >= 1");
    if (!(local.prox_mu >= 0.0)) throw ConfigInvalid("prox_mu must be >= 0");
    std::set<int> ids;
    for (const auto& d : domains) {
        try {
            d.validate(input_dim);
        } catch (const InvalidSpec& e) {
            throw ConfigInvalid(e.what());
        }
        if (!ids.insert(d.domain_id).second) {
            throw ConfigInvalid("duplicate domain id " + std::to_string(d.domain_id));
        }
    }
    for (Strategy s : strategies) {
        ServerConfig sc = server;
        sc.strategy = s;
        sc.validate();
    }
}

std::string ExperimentConfig::fingerprint() const {
    json j = config_to_json(*this);
    for (const char* key : {"strategies", "seeds", "data_fractions", "output_dir",
                            "debug_clustering", "aggregation_frequency"}) {
        j.erase(key);
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
    return os.str();
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    json strategies = json::array();
    for (Strategy s : cfg.strategies) strategies.push_back(std::string(to_string(s)));
    json domains = json::array();
    for (const auto& d : cfg.domains) domains.push_back(domain_to_json(d));
    return json{{"task", std::string(to_string(cfg.task))},
                {"rounds", cfg.server.rounds},
                {"aggregation_frequency", cfg.server.aggregation_frequency},
                {"warmup_rounds", cfg.server.warmup_rounds},
                {"strategies", strategies},
                {"seeds", cfg.seeds},
                {"data_fractions", cfg.data_fractions},
                {"input_dim", cfg.input_dim},
                {"feature_dim", cfg.feature_dim},
                {"local",
                 {{"epochs", cfg.local.epochs},
                  {"learning_rate", cfg.local.learning_rate},
                  {"batch_size", cfg.local.batch_size},
                  {"prox_mu", cfg.local.prox_mu}}},
                {"domains", domains},
                {"output_dir", cfg.output_dir.string()},
                {"debug_clustering", cfg.debug_clustering}};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg = ExperimentConfig::defaults();
    try {
        if (j.contains("task")) cfg.task = parse_task(j.at("task").get<std::string>());
        cfg.server.rounds = j.value("rounds", cfg.server.rounds);
        cfg.server.aggregation_frequency = j.value("aggregation_frequency", cfg.server.aggregation_frequency);
        cfg.server.warmup_rounds = j.value("warmup_rounds", cfg.server.warmup_rounds);
        if (j.contains("strategies")) {
            cfg.strategies.clear();
            for (const auto& s : j.at("strategies")) {
                cfg.strategies.push_back(parse_strategy(s.get<std::string>()));
            }
        }
        if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("data_fractions")) {
            cfg.data_fractions = j.at("data_fractions").get<std::vector<double>>();
        }
        const bool dims_changed = j.contains("input_dim");
        cfg.input_dim = j.value("input_dim", cfg.input_dim);
        cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
        if (j.contains("local")) {
            const json& l = j.at("local");
            cfg.local.epochs = l.value("epochs", cfg.local.epochs);
            cfg.local.learning_rate = l.value("learning_rate", cfg.local.learning_rate);
            cfg.local.batch_size = l.value("batch_size", cfg.local.batch_size);
            cfg.local.prox_mu = l.value("prox_mu", cfg.local.prox_mu);
        }
        if (j.contains("domains")) {
            cfg.domains.clear();
            for (const auto& d : j.at("domains")) {
                cfg.domains.push_back(domain_from_json(d, cfg.input_dim));
            }
        } else if (dims_changed) {
            // Re-derive the default domains at the new input dim.
            ExperimentConfig base = ExperimentConfig::defaults();
            cfg.domains.clear();
            for (const auto& d : base.domains) {
                const double magnitude = d.feature_shift.norm();
                DomainSpec copy = d;
                copy.feature_shift = magnitude * shift_direction(d.domain_id, cfg.input_dim);
                cfg.domains.push_back(std::move(copy));
            }
        }
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
        cfg.debug_clustering = j.value("debug_clustering", cfg.debug_clustering);
    } catch (const json::exception& e) {
        throw ConfigInvalid(std::string("config: ") + e.what());
    } catch (const InvalidSpec& e) {
        throw ConfigInvalid(std::string("config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open config " + path.string());
    }
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigInvalid("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

std::vector<ClientState> make_federation(const ExperimentConfig& cfg, double data_fraction,
                                         std::uint64_t seed) {
    auto backbone = std::make_shared<const FrozenBackbone>(
        cfg.input_dim, cfg.feature_dim, derive_seed(seed, SeedPurpose::Backbone));
    const std::uint64_t concept_seed = derive_seed(seed, SeedPurpose::SharedConcept);
    std::vector<ClientState> clients;
    clients.reserve(cfg.domains.size());
    for (std::size_t i = 0; i < cfg.domains.size(); ++i) {
        ClientState c;
        c.domain = cfg.domains[i];
        c.task = cfg.task;
        c.backbone = backbone;
        c.data = generate_domain_dataset(c.domain, *backbone, cfg.task, concept_seed,
                                         derive_seed(seed, SeedPurpose::Domain, 0, i), data_fraction);
        c.local.learning_rate = cfg.local.learning_rate;
        c.local.batch_size = cfg.local.batch_size;
        c.local.prox_mu = cfg.local.prox_mu;
        c.local.steps = cfg.local.steps_for(c.data.train.size());
        clients.push_back(std::move(c));
    }
    return clients;
}

std::string CellKey::name() const {
    return std::string(to_string(strategy)) + "_T" + std::to_string(aggregation_frequency) + "_f" +
           format_double(data_fraction) + "_s" + std::to_string(seed);
}

nlohmann::json summary_to_json(const RunSummary& s) {
    json domains = json::array();
    for (const auto& m : s.final_domain_metrics) domains.push_back(metrics_to_json(m));
    json j{{"strategy", std::string(to_string(s.key.strategy))},
           {"aggregation_frequency", s.key.aggregation_frequency},
           {"data_fraction", s.key.data_fraction},
           {"seed", s.key.seed},
           {"rounds", s.rounds},
           {"warmup_rounds", s.warmup_rounds},
           {"task", std::string(to_string(s.task))},
           {"config_fingerprint", s.config_fingerprint},
           {"train_sizes", s.train_sizes},
           {"final_domain_metrics", domains},
           {"final_avg_loss", s.final_avg_loss},
           {"final_std_loss", s.final_std_loss},
           {"worst_domain_loss", s.worst_domain_loss}};
    if (s.final_avg_accuracy) j["final_avg_accuracy"] = *s.final_avg_accuracy;
    if (s.worst_domain_accuracy) j["worst_domain_accuracy"] = *s.worst_domain_accuracy;
    return j;
}

RunSummary summary_from_json(const nlohmann::json& j) {
    RunSummary s;
    try {
        s.key.strategy = parse_strategy(j.at("strategy").get<std::string>());
        s.key.aggregation_frequency = j.at("aggregation_frequency").get<int>();
        s.key.data_fraction = j.at("data_fraction").get<double>();
        s.key.seed = j.at("seed").get<std::uint64_t>();
        s.rounds = j.at("rounds").get<int>();
        s.warmup_rounds = j.at("warmup_rounds").get<int>();
        s.task = parse_task(j.at("task").get<std::string>());
        s.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        s.train_sizes = j.at("train_sizes").get<std::vector<std::size_t>>();
        for (const auto& m : j.at("final_domain_metrics")) {
            s.final_domain_metrics.push_back(metrics_from_json(m));
        }
        s.final_avg_loss = j.at("final_avg_loss").get<double>();
        s.final_std_loss = j.at("final_std_loss").get<double>();
        s.worst_domain_loss = j.at("worst_domain_loss").get<double>();
        if (j.contains("final_avg_accuracy")) s.final_avg_accuracy = j.at("final_avg_accuracy").get<double>();
        if (j.contains("worst_domain_accuracy")) {
            s.worst_domain_accuracy = j.at("worst_domain_accuracy").get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigInvalid(std::string("summary: ") + e.what());
    }
    return s;
}

CellResult run_cell(const ExperimentConfig& cfg, const CellKey& key) {
    ServerConfig sc = cfg.server;
    sc.strategy = key.strategy;
    sc.aggregation_frequency = key.aggregation_frequency;
    sc.master_seed = key.seed;
    sc.validate();

    std::vector<ClientState> clients = make_federation(cfg, key.data_fraction, key.seed);
    CellResult out;
    out.trace = run_simulation(sc, clients);

    RunSummary& s = out.summary;
    s.key = key;
    s.key.aggregation_frequency = sc.effective_frequency();
    s.rounds = sc.rounds;
    s.warmup_rounds = sc.warmup_rounds;
    s.task = cfg.task;
    s.config_fingerprint = cfg.fingerprint();
    for (const auto& c : clients) s.train_sizes.push_back(c.data.train.size());
    const RoundRecord& last = out.trace.rounds.back();
    s.final_domain_metrics = last.domain_metrics;
    s.final_avg_loss = last.loss.mean;
    s.final_std_loss = last.loss.stddev;
    s.worst_domain_loss = last.worst_domain_loss();
    if (last.accuracy) {
        s.final_avg_accuracy = last.accuracy->mean;
        double worst = 1.0;
        for (const auto& m : last.domain_metrics) worst = std::min(worst, *m.accuracy);
        s.worst_domain_accuracy = worst;
    }
    return out;
}

void write_metrics_csv(std::ostream& os, const SimulationTrace& trace) {
    const RoundRecord& first = trace.rounds.empty() ? trace.warmup.front() : trace.rounds.front();
    const std::size_t domains = first.domain_metrics.size();
    const bool with_accuracy = first.accuracy.has_value();

    os << "round,decision";
    for (std::size_t i = 0; i < domains; ++i) os << ",domain_" << i << "_loss";
    os << ",avg_loss,std_loss";
    if (with_accuracy) {
        for (std::size_t i = 0; i < domains; ++i) os << ",domain_" << i << "_accuracy";
        os << ",avg_accuracy,std_accuracy";
    }
    os << '\n';

    auto row = [&](const RoundRecord& r) {
        os << r.round << ',' << to_string(r.decision);
        for (const auto& m : r.domain_metrics) os << ',' << format_double(m.loss);
        os << ',' << format_double(r.loss.mean) << ',' << format_double(r.loss.stddev);
        if (with_accuracy) {
            for (const auto& m : r.domain_metrics) os << ',' << format_double(m.accuracy.value_or(0.0));
            os << ',' << format_double(r.accuracy->mean) << ',' << format_double(r.accuracy->stddev);
        }
        os << '\n';
    };
    for (const auto& r : trace.warmup) row(r);
    for (const auto& r : trace.rounds) row(r);
}

void write_trace_jsonl(std::ostream& os, const SimulationTrace& trace) {
    for (const auto& r : trace.rounds) {
        json j{{"round", r.round},
               {"decision", std::string(to_string(r.decision))},
               {"global_eval", r.global_eval}};
        if (r.clusters) j["cluster_index_list"] = r.clusters->index_list;
        if (r.plan) {
            j["assignment"] = r.plan->assignment;
            j["plan_strategy"] = std::string(to_string(r.plan->strategy));
            j["history_relaxed"] = r.plan->history_relaxed;
        }
        os << j.dump() << '\n';
    }
}

fs::path write_cell(const ExperimentConfig& cfg, const CellResult& cell, const fs::path& dir) {
    const fs::path cell_dir = dir / cell.summary.key.name();
    std::error_code ec;
    fs::create_directories(cell_dir, ec);
    if (ec) {
        throw IoError("cannot create " + cell_dir.string() + ": " + ec.message());
    }
    std::ostringstream csv;
    write_metrics_csv(csv, cell.trace);
    write_file(cell_dir / "metrics.csv", csv.str());

    json summary = summary_to_json(cell.summary);
    summary["metadata"] = {{"written_at_unix", std::chrono::duration_cast<std::chrono::seconds>(
                                                   std::chrono::system_clock::now().time_since_epoch())
                                                   .count()}};
    write_file(cell_dir / "summary.json", summary.dump(2) + "\n");

    std::ostringstream trace;
    write_trace_jsonl(trace, cell.trace);
    write_file(cell_dir / "trace.jsonl", trace.str());

    if (cfg.debug_clustering) {
        std::ostringstream log;
        for (const auto& r : cell.trace.rounds) {
            if (!r.clusters) continue;
            ClusteringResult result{ClusterAssignment::from_index_list(r.clusters->index_list),
                                    r.clusters->merges};
            log << "round " << r.round << '\n'
                << format_clustering_log(DistanceMatrix(r.clusters->distances), result) << '\n';
        }
        write_file(cell_dir / "clustering.log", log.str());
    }
    return cell_dir;
}

ComparisonTable compare_strategies(const std::vector<RunSummary>& summaries) {
    using GroupKey = std::tuple<int, int, double>;
    std::map<GroupKey, std::vector<const RunSummary*>> groups;
    for (const auto& s : summaries) {
        groups[{static_cast<int>(s.key.strategy), s.key.aggregation_frequency, s.key.data_fraction}]
            .push_back(&s);
    }
    if (groups.size() < 2) {
        throw ConfigInvalid("comparison needs at least two strategy groups, got " +
                            std::to_string(groups.size()));
    }

    ComparisonTable table;
    table.config_fingerprint = summaries.front().config_fingerprint;
    std::optional<std::set<std::uint64_t>> seed_set;
    for (const auto& [key, members] : groups) {
        std::set<std::uint64_t> seeds;
        for (const RunSummary* s : members) {
            if (s->config_fingerprint != table.config_fingerprint) {
                throw ConfigInvalid("summaries come from different configurations (" +
                                    s->config_fingerprint + " vs " + table.config_fingerprint + ")");
            }
            if (!seeds.insert(s->key.seed).second) {
                throw MismatchedSeeds("seed " + std::to_string(s->key.seed) + " appears twice in " +
                                      std::string(to_string(s->key.strategy)));
            }
        }
        if (seed_set && *seed_set != seeds) {
            throw MismatchedSeeds("strategy groups cover different seed sets");
        }
        seed_set = seeds;

        ComparisonRow row;
        const RunSummary& head = *members.front();
        row.strategy = head.key.strategy;
        row.aggregation_frequency = head.key.aggregation_frequency;
        row.data_fraction = head.key.data_fraction;
        row.train_sizes = head.train_sizes;
        row.runs = members.size();
        const double n = static_cast<double>(members.size());
        bool accuracy = true;
        double acc = 0.0;
        for (const RunSummary* s : members) {
            row.mean_final_avg_loss += s->final_avg_loss / n;
            row.mean_worst_domain_loss += s->worst_domain_loss / n;
            row.mean_final_std_loss += s->final_std_loss / n;
            if (s->final_avg_accuracy) {
                acc += *s->final_avg_accuracy / n;
            } else {
                accuracy = false;
            }
        }
        if (accuracy) row.mean_final_avg_accuracy = acc;
        table.rows.push_back(std::move(row));
    }
    table.seeds.assign(seed_set->begin(), seed_set->end());

    std::stable_sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
        return a.mean_final_avg_loss < b.mean_final_avg_loss;
    });
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const bool tied = i > 0 && table.rows[i].mean_final_avg_loss == table.rows[i - 1].mean_final_avg_loss;
        table.rows[i].rank = tied ? table.rows[i - 1].rank : static_cast<int>(i + 1);
    }
    return table;
}

nlohmann::json comparison_to_json(const ComparisonTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows) {
        json j{{"rank", r.rank},
               {"strategy", std::string(to_string(r.strategy))},
               {"aggregation_frequency", r.aggregation_frequency},
               {"data_fraction", r.data_fraction},
               {"train_sizes", r.train_sizes},
               {"runs", r.runs},
               {"mean_final_avg_loss", r.mean_final_avg_loss},
               {"mean_worst_domain_loss", r.mean_worst_domain_loss},
               {"mean_final_std_loss", r.mean_final_std_loss}};
        if (r.mean_final_avg_accuracy) j["mean_final_avg_accuracy"] = *r.mean_final_avg_accuracy;
        rows.push_back(std::move(j));
    }
    return json{{"config_fingerprint", table.config_fingerprint}, {"seeds", table.seeds}, {"rows", rows}};
}

std::string comparison_to_text(const ComparisonTable& table) {
    std::ostringstream os;
    os << "config " << table.config_fingerprint << ", " << table.seeds.size() << " seeds\n";
    os << std::left << std::setw(6) << "rank" << std::setw(14) << "strategy" << std::setw(5) << "T"
       << std::setw(10) << "fraction" << std::setw(24) << "train_sizes" << std::right
       << std::setw(14) << "avg_loss" << std::setw(14) << "worst_loss" << std::setw(14) << "std_loss";
    const bool accuracy = !table.rows.empty() && table.rows.front().mean_final_avg_accuracy;
    if (accuracy) os << std::setw(14) << "avg_acc";
    os << '\n';
    for (const auto& r : table.rows) {
        std::string sizes;
        for (std::size_t i = 0; i < r.train_sizes.size(); ++i) {
            sizes += (i ? "/" : "") + std::to_string(r.train_sizes[i]);
        }
        os << std::left << std::setw(6) << r.rank << std::setw(14) << to_string(r.strategy)
           << std::setw(5) << r.aggregation_frequency << std::setw(10) << format_double(r.data_fraction)
           << std::setw(24) << sizes << std::right << std::fixed << std::setprecision(6)
           << std::setw(14) << r.mean_final_avg_loss << std::setw(14) << r.mean_worst_domain_loss
           << std::setw(14) << r.mean_final_std_loss;
        if (accuracy && r.mean_final_avg_accuracy) os << std::setw(14) << *r.mean_final_avg_accuracy;
        os << std::defaultfloat << '\n';
    }
    return os.str();
}

namespace {

void write_comparison(const ComparisonTable& table, const fs::path& dir) {
    write_file(dir / "comparison.json", comparison_to_json(table).dump(2) + "\n");
    write_file(dir / "comparison.txt", comparison_to_text(table));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) {
        throw IoError("cannot create " + cfg.output_dir.string() + ": " + ec.message());
    }
    write_file(cfg.output_dir / "config.json", config_to_json(cfg).dump(2) + "\n");

    ExperimentResult result;
    for (Strategy strategy : cfg.strategies) {
        for (double fraction : cfg.data_fractions) {
            for (std::uint64_t seed : cfg.seeds) {
                const CellKey key{strategy, cfg.server.aggregation_frequency, fraction, seed};
                CellResult cell = run_cell(cfg, key);
                write_cell(cfg, cell, cfg.output_dir / "cells");
                result.summaries.push_back(std::move(cell.summary));
            }
        }
    }
    std::set<std::tuple<int, int, double>> groups;
    for (const auto& s : result.summaries) {
        groups.insert({static_cast<int>(s.key.strategy), s.key.aggregation_frequency, s.key.data_fraction});
    }
    if (groups.size() >= 2) {
        result.comparison = compare_strategies(result.summaries);
        write_comparison(*result.comparison, cfg.output_dir);
    }
    return result;
}

std::vector<RunSummary> load_summaries(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw IoError(dir.string() + " is not a directory");
    }
    std::vector<fs::path> paths;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename() == "summary.json") {
            paths.push_back(entry.path());
        }
    }
    std::sort(paths.begin(), paths.end());
    std::vector<RunSummary> out;
    for (const auto& p : paths) {
        std::ifstream is(p);
        json j;
        try {
            is >> j;
        } catch (const json::exception& e) {
            throw IoError("cannot parse " + p.string() + ": " + e.what());
        }
        out.push_back(summary_from_json(j));
    }
    return out;
}

ComparisonTable compare_directory(const fs::path& dir) {
    const std::vector<RunSummary> summaries = load_summaries(dir);
    if (summaries.empty()) {
        throw IoError("no summary.json files under " + dir.string());
    }
    ComparisonTable table = compare_strategies(summaries);
    write_comparison(table, dir);
    return table;
}

std::vector<AblationRow> ablation_T(const ExperimentConfig& cfg, const std::vector<int>& t_values) {
    if (t_values.empty()) {
        throw ConfigInvalid("no T values given");
    }
    ExperimentConfig base = cfg;
    base.strategies = {Strategy::Clustered};
    for (int t : t_values) {
        ServerConfig sc = base.server;
        sc.aggregation_frequency = t;
        sc.strategy = Strategy::Clustered;
        sc.validate();
    }
    base.server.aggregation_frequency = t_values.front();
    base.validate();

    const fs::path cells = base.output_dir / "cells";
    std::vector<AblationRow> rows;
    for (int t : t_values) {
        AblationRow row;
        row.aggregation_frequency = t;
        for (std::uint64_t seed : base.seeds) {
            const CellKey key{Strategy::Clustered, t, base.data_fractions.front(), seed};
            CellResult cell = run_cell(base, key);
            write_cell(base, cell, cells);
            const double n = static_cast<double>(base.seeds.size());
            row.mean_final_avg_loss += cell.summary.final_avg_loss / n;
            row.mean_worst_domain_loss += cell.summary.worst_domain_loss / n;
            row.mean_final_std_loss += cell.summary.final_std_loss / n;
            ++row.runs;
        }
        rows.push_back(row);
    }

    json j = json::array();
    std::ostringstream txt;
    txt << std::left << std::setw(6) << "T" << std::right << std::setw(14) << "avg_loss"
        << std::setw(14) << "worst_loss" << std::setw(14) << "std_loss" << std::setw(6) << "runs" << '\n';
    for (const auto& r : rows) {
        j.push_back({{"aggregation_frequency", r.aggregation_frequency},
                     {"runs", r.runs},
                     {"mean_final_avg_loss", r.mean_final_avg_loss},
                     {"mean_worst_domain_loss", r.mean_worst_domain_loss},
                     {"mean_final_std_loss", r.mean_final_std_loss}});
        txt << std::left << std::setw(6) << r.aggregation_frequency << std::right << std::fixed
            << std::setprecision(6) << std::setw(14) << r.mean_final_avg_loss << std::setw(14)
            << r.mean_worst_domain_loss << std::setw(14) << r.mean_final_std_loss << std::setw(6)
            << r.runs << std::defaultfloat << '\n';
    }
    write_file(base.output_dir / "ablation_t.json",
               json{{"config_fingerprint", base.fingerprint()}, {"rows", j}}.dump(2) + "\n");
    write_file(base.output_dir / "ablation_t.txt", txt.str());
    return rows;
}

}  // namespace fedx
