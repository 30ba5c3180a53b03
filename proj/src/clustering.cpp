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

#include "fedx/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace fedx {

DistanceMatrix::DistanceMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols()) {
        throw DimensionMismatch("distance matrix must be square");
    }
    const Eigen::Index n = entries_.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (entries_(i, i) != 0.0) {
            throw InvalidAssignment("distance matrix diagonal must be zero");
        }
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = entries_(i, j);
            if (d != entries_(j, i)) {
                throw InvalidAssignment("distance matrix must be symmetric");
            }
            if (!(d >= 0.0 && d <= 2.0)) {
                throw InvalidAssignment("distance matrix entry outside [0, 2]");
            }
        }
    }
}

ClusterAssignment ClusterAssignment::from_index_list(std::vector<int> index_list) {
    ClusterAssignment ca;
    for (std::size_t i = 0; i < index_list.size(); ++i) {
        const int label = index_list[i];
        if (label == 0) {
            ca.members_0_.push_back(i);
        } else if (label == 1) {
            ca.members_1_.push_back(i);
        } else {
            throw InvalidAssignment("cluster label must be 0 or 1, got " + std::to_string(label));
        }
    }
    if (index_list.size() >= 2 && (ca.members_0_.empty() || ca.members_1_.empty())) {
        throw InvalidAssignment("both clusters must be non-empty");
    }
    ca.index_list_ = std::move(index_list);
    return ca;
}

ClusterAssignment ClusterAssignment::from_block(std::size_t n, std::span<const std::size_t> block) {
    std::vector<int> index_list(n, 1);
    for (std::size_t i : block) {
        if (i >= n) {
            throw InvalidAssignment("cluster member " + std::to_string(i) + " out of range");
        }
        index_list[i] = 0;
    }
    if (n > 0 && index_list[0] == 1) {
        for (int& label : index_list) {
            label = 1 - label;
        }
    }
    return from_index_list(std::move(index_list));
}

DistanceMatrix build_distance_matrix(std::span<const ParamVector> decoders) {
    const std::size_t n = decoders.size();
    if (n < 2) {
        throw TooFewDecoders("need at least 2 decoders, got " + std::to_string(n));
    }
    const auto dim = decoders.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        if (decoders[i].size() != dim) {
            throw DimensionMismatch("decoder " + std::to_string(i) + " has dim " +
                                    std::to_string(decoders[i].size()));
        }
        if (decoders[i].norm() == 0.0) {
            throw ZeroNormVector(i);
        }
    }
    Eigen::MatrixXd entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                    static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = cosine_distance(decoders[i], decoders[j]);
            entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
            entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
        }
    }
    return DistanceMatrix(std::move(entries));
}

double average_linkage(const DistanceMatrix& dm, std::span<const std::size_t> ci,
                       std::span<const std::size_t> cj) {
    if (ci.empty() || cj.empty()) {
        throw EmptyInput("average_linkage: empty cluster");
    }
    for (std::size_t u : ci) {
        if (u >= dm.size()) {
            throw InvalidAssignment("average_linkage: index out of range");
        }
        if (std::find(cj.begin(), cj.end(), u) != cj.end()) {
            throw OverlappingClusters("average_linkage: decoder " + std::to_string(u) +
                                      " is in both clusters");
        }
    }
    double sum = 0.0;
    for (std::size_t u : ci) {
        for (std::size_t v : cj) {
            if (v >= dm.size()) {
                throw InvalidAssignment("average_linkage: index out of range");
            }
            sum += dm(u, v);
        }
    }
    return sum / static_cast<double>(ci.size() * cj.size());
}

ClusteringResult agglomerate_to_two(const DistanceMatrix& dm) {
    const std::size_t n = dm.size();
    if (n < 2) {
        throw TooFewDecoders("need at least 2 decoders, got " + std::to_string(n));
    }

    // Clusters stay sorted by lowest member, and members stay sorted, so the
    // list position order matches the tie-break order.
    std::vector<std::vector<std::size_t>> clusters(n);
    for (std::size_t i = 0; i < n; ++i) {
        clusters[i] = {i};
    }
    Eigen::MatrixXd linkage = dm.entries();

    ClusteringResult result;
    while (clusters.size() > 2) {
        const std::size_t k = clusters.size();
        std::size_t best_a = 0;
        std::size_t best_b = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = a + 1; b < k; ++b) {
                const double l = linkage(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                if (l < best) {
                    best = l;
                    best_a = a;
                    best_b = b;
                }
            }
        }

        result.merges.push_back({clusters[best_a], clusters[best_b], best});

        auto& merged = clusters[best_a];
        merged.insert(merged.end(), clusters[best_b].begin(), clusters[best_b].end());
        std::sort(merged.begin(), merged.end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));

        // Drop row/column best_b, then refresh the merged cluster's linkages.
        const auto kk = static_cast<Eigen::Index>(k);
        const auto bb = static_cast<Eigen::Index>(best_b);
        Eigen::MatrixXd next(kk - 1, kk - 1);
        for (Eigen::Index r = 0, rr = 0; r < kk; ++r) {
            if (r == bb) continue;
            for (Eigen::Index c = 0, cc = 0; c < kk; ++c) {
                if (c == bb) continue;
                next(rr, cc) = linkage(r, c);
                ++cc;
            }
            ++rr;
        }
        linkage = std::move(next);
        const auto aa = static_cast<Eigen::Index>(best_a);
        for (std::size_t other = 0; other < clusters.size(); ++other) {
            if (other == best_a) continue;
            const auto& lo = other < best_a ? clusters[other] : clusters[best_a];
            const auto& hi = other < best_a ? clusters[best_a] : clusters[other];
            const double l = average_linkage(dm, lo, hi);
            linkage(aa, static_cast<Eigen::Index>(other)) = l;
            linkage(static_cast<Eigen::Index>(other), aa) = l;
        }
    }

    result.assignment = ClusterAssignment::from_block(n, clusters.front());
    return result;
}

ClusterAssignment cluster_to_two(const DistanceMatrix& dm) {
    return agglomerate_to_two(dm).assignment;
}

namespace {

void write_members(std::ostream& os, const std::vector<std::size_t>& members) {
    os << '{';
    for (std::size_t i = 0; i < members.size(); ++i) {
        os << (i ? "," : "") << members[i];
    }
    os << '}';
}

}  // namespace

std::string format_clustering_log(const DistanceMatrix& dm, const ClusteringResult& result) {
    std::ostringstream os;
    os << std::setprecision(9);
    os << "distance matrix (" << dm.size() << "x" << dm.size() << ")\n";
    for (std::size_t i = 0; i < dm.size(); ++i) {
        for (std::size_t j = 0; j < dm.size(); ++j) {
            os << (j ? " " : "") << dm(i, j);
        }
        os << '\n';
    }
    os << "merges\n";
    for (std::size_t s = 0; s < result.merges.size(); ++s) {
        const auto& m = result.merges[s];
        os << "  " << s << ": ";
        write_members(os, m.left);
        os << " + ";
        write_members(os, m.right);
        os << " linkage=" << m.linkage << '\n';
    }
    os << "clusters C0=";
    write_members(os, result.assignment.members(0));
    os << " C1=";
    write_members(os, result.assignment.members(1));
    os << '\n';
    return os.str();
}

}  // namespace fedx
