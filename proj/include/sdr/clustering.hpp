/*******************************************************************************
* Copyright 2026 The SDR Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*******************************************************************************/
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sdr/optim.hpp"
#include "sdr/rng.hpp"
#include "sdr/tensor.hpp"

namespace sdr {

/// Frozen, row-normalized features plus stable sample identifiers.
struct FeatureTable {
    Tensor2D features; // n x d, each row unit l2-norm
    std::vector<std::string> sample_ids;

    std::size_t count() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }

    /// Checks row norms (within 1e-9 of 1, zero rows rejected) and id count.
    void validate() const;

    /// ids default to the row index rendered in decimal.
    static FeatureTable with_default_ids(Tensor2D features);
};

struct SinkhornResult {
    Tensor2D assignment;   // U, n x k, entries >= 0, sums to 1 overall
    double marginal_error; // achieved max l1 deviation of row/col marginals
    bool converged;
    std::size_t iterations;
};

/// State of the entropic assignment problem after alternating optimization.
struct ClusterModel {
    Tensor2D centroids; // k x d, unit rows
    double epsilon;
    Tensor2D soft_assignment;             // final U
    std::vector<std::size_t> hard_labels; // n, in [0, k)
};

/// Hard partition of sample indices into k subsets. Subset j holds the
/// samples labeled j; the full index range is the implicit whole-dataset
/// entry.
struct DatasetSplit {
    std::vector<std::vector<std::size_t>> subsets;
    std::size_t total = 0;

    std::size_t cluster_count() const { return subsets.size(); }
};

struct ClusterConfig {
    double epsilon = 0.05;
    std::size_t sinkhorn_iters = 200;
    double sinkhorn_tol = 1e-6;
    double centroid_lr = 0.02;
    double centroid_momentum = 0.9;
    double temperature = 0.1;
};

/// S[i][j] = <f_i, c_j>, cosine scores of samples against centroids.
Tensor2D score_matrix(const FeatureTable& table, const Tensor2D& centroids);

/// Maximizes Tr(U^T S) + eps*H(U) over the transportation polytope with
/// uniform marginals (rows 1/n, columns 1/k) by alternating row/column
/// scaling. Runs entirely in the log domain, so arbitrarily small eps cannot
/// overflow exp(S/eps). Non-convergence within max_iters is reported via the
/// flag, not an error.
SinkhornResult sinkhorn(const Tensor2D& scores, double epsilon, std::size_t max_iters,
                        double tol);

/// Tr(U^T S) + eps*H(U) with H(U) = -sum U log U (0 log 0 = 0).
double entropic_objective(const Tensor2D& assignment, const Tensor2D& scores, double epsilon);

struct CentroidLoss {
    double loss;
    Tensor2D grad; // k x d, aligned with centroids
};

/// Cross-entropy between the scaled assignment (rows of n*U are proper
/// distributions) and softmax-normalized scores at the given temperature.
CentroidLoss centroid_loss(const Tensor2D& features, const Tensor2D& assignment,
                           const Tensor2D& centroids, double temperature);

/// One SGD step on the centroid loss followed by row re-normalization.
void centroid_step(const FeatureTable& table, const Tensor2D& assignment, Tensor2D& centroids,
                   SgdState& state, double temperature);

/// Alternates sinkhorn assignment and centroid SGD for `epochs` rounds from
/// k distinct randomly chosen feature rows. Hard labels are the row argmax
/// of the final score matrix.
ClusterModel cluster(const FeatureTable& table, std::size_t k, std::size_t epochs, Rng& rng,
                     const ClusterConfig& config);

/// Buckets indices by label. Every subset must end up nonempty.
DatasetSplit split_dataset(const std::vector<std::size_t>& labels, std::size_t k);

} // namespace sdr
