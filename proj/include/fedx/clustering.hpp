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

#ifndef FEDX_CLUSTERING_HPP
#define FEDX_CLUSTERING_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedx/params.hpp"

namespace fedx {

/// Symmetric n x n matrix of pairwise cosine distances with a zero diagonal.
class DistanceMatrix {
public:
    DistanceMatrix() = default;

    /// Validates symmetry, the zero diagonal and the [0, 2] range.
    explicit DistanceMatrix(Eigen::MatrixXd entries);

    std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
    double operator()(std::size_t i, std::size_t j) const {
        return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    const Eigen::MatrixXd& entries() const noexcept { return entries_; }

private:
    Eigen::MatrixXd entries_;
};

/// Two-way partition of decoder indices. I[i] == 0 iff i is in members_0, and
/// the block holding decoder 0 is always labeled 0.
class ClusterAssignment {
public:
    ClusterAssignment() = default;

    /// Builds from the index list I. Throws InvalidAssignment unless every
    /// entry is 0 or 1 and, for n >= 2, both clusters are non-empty.
    static ClusterAssignment from_index_list(std::vector<int> index_list);

    /// Builds from one block; the complement becomes the other block. Labels
    /// are oriented so that decoder 0 lands in cluster 0.
    static ClusterAssignment from_block(std::size_t n, std::span<const std::size_t> block);

    std::size_t size() const noexcept { return index_list_.size(); }
    const std::vector<int>& index_list() const noexcept { return index_list_; }
    const std::vector<std::size_t>& members(int label) const {
        return label == 0 ? members_0_ : members_1_;
    }
    int label_of(std::size_t i) const { return index_list_.at(i); }

    bool operator==(const ClusterAssignment&) const = default;

private:
    std::vector<int> index_list_;
    std::vector<std::size_t> members_0_;
    std::vector<std::size_t> members_1_;
};

/// Pairwise cosine distances between uploaded decoders.
DistanceMatrix build_distance_matrix(std::span<const ParamVector> decoders);

/// Mean of dm[u][v] over u in ci, v in cj.
double average_linkage(const DistanceMatrix& dm, std::span<const std::size_t> ci,
                       std::span<const std::size_t> cj);

/// One agglomeration step. `left` is the block with the smaller lowest index.
struct MergeStep {
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    double linkage = 0.0;

    bool operator==(const MergeStep&) const = default;
};

struct ClusteringResult {
    ClusterAssignment assignment;
    std::vector<MergeStep> merges;
};

/// Average-linkage agglomeration from singletons down to two clusters,
/// returning the merge sequence alongside the partition.
///
/// Each step merges the pair of clusters with the smallest average linkage.
/// Ties go to the pair whose (lowest index, lowest index) tuple is
/// lexicographically smallest. Linkages against a merged cluster are
/// recomputed from the original pairwise matrix.
ClusteringResult agglomerate_to_two(const DistanceMatrix& dm);

/// Partition-only form of agglomerate_to_two.
ClusterAssignment cluster_to_two(const DistanceMatrix& dm);

/// Plain-text dump of the distance matrix and merge trace.
std::string format_clustering_log(const DistanceMatrix& dm, const ClusteringResult& result);

}  // namespace fedx

#endif  // FEDX_CLUSTERING_HPP
