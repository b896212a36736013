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
#include "sdr/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdr {

namespace {

double logsumexp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

} // namespace

void FeatureTable::validate() const {
    SDR_CHECK(sample_ids.size() == features.rows(),
              "FeatureTable: sample id count does not match feature rows");
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const double n = l2_norm(features.row(i));
        if (std::abs(n - 1.0) > 1e-9)
            throw NumericError("FeatureTable: row " + std::to_string(i) +
                               " is not unit-normalized (norm=" + std::to_string(n) + ")");
    }
}

FeatureTable FeatureTable::with_default_ids(Tensor2D features) {
    FeatureTable t;
    t.sample_ids.reserve(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) t.sample_ids.push_back(std::to_string(i));
    t.features = std::move(features);
    return t;
}

Tensor2D score_matrix(const FeatureTable& table, const Tensor2D& centroids) {
    SDR_CHECK_SHAPE(table.dim() == centroids.cols(),
                    "score_matrix: feature and centroid dimensions disagree");
    return matmul_abt(table.features, centroids);
}

SinkhornResult sinkhorn(const Tensor2D& scores, double epsilon, std::size_t max_iters,
                        double tol) {
    SDR_CHECK(epsilon > 0.0, "sinkhorn: epsilon must be positive");
    SDR_CHECK(scores.rows() > 0 && scores.cols() > 0, "sinkhorn: empty score matrix");
    if (!scores.all_finite()) throw NumericError("sinkhorn: non-finite score matrix");

    const std::size_t n = scores.rows(), k = scores.cols();
    const double row_target = 1.0 / static_cast<double>(n);
    const double col_target = 1.0 / static_cast<double>(k);
    const double log_row = std::log(row_target);
    const double log_col = std::log(col_target);

    // A = S/eps; U = exp(A + log_u (x) log_v). All scaling happens on log_u,
    // log_v so exp never sees an unshifted A entry.
    Tensor2D a(n, k);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = scores.data()[i] / epsilon;

    std::vector<double> log_u(n, 0.0), log_v(k, 0.0);
    std::vector<double> tmp(std::max(n, k));

    SinkhornResult res;
    res.assignment = Tensor2D(n, k);
    res.converged = false;
    res.marginal_error = std::numeric_limits<double>::infinity();
    res.iterations = 0;

    auto materialize = [&]() {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j)
                res.assignment(i, j) = std::exp(a(i, j) + log_u[i] + log_v[j]);
    };
    auto marginal_error = [&]() {
        double row_err = 0.0, col_err = 0.0;
        std::vector<double> col_sum(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double row_sum = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                row_sum += res.assignment(i, j);
                col_sum[j] += res.assignment(i, j);
            }
            row_err += std::abs(row_sum - row_target);
        }
        for (std::size_t j = 0; j < k; ++j) col_err += std::abs(col_sum[j] - col_target);
        return std::max(row_err, col_err);
    };

    for (std::size_t it = 0; it < max_iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < k; ++j) tmp[j] = a(i, j) + log_v[j];
            log_u[i] = log_row - logsumexp({tmp.data(), k});
        }
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t i = 0; i < n; ++i) tmp[i] = a(i, j) + log_u[i];
            log_v[j] = log_col - logsumexp({tmp.data(), n});
        }
        res.iterations = it + 1;
        materialize();
        res.marginal_error = marginal_error();
        if (res.marginal_error <= tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

double entropic_objective(const Tensor2D& assignment, const Tensor2D& scores, double epsilon) {
    SDR_CHECK_SHAPE(assignment.same_shape(scores), "entropic_objective: shape mismatch");
    double linear = 0.0, entropy = 0.0;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        const double u = assignment.data()[i];
        linear += u * scores.data()[i];
        if (u > 0.0) entropy -= u * std::log(u);
    }
    return linear + epsilon * entropy;
}

CentroidLoss centroid_loss(const Tensor2D& features, const Tensor2D& assignment,
                           const Tensor2D& centroids, double temperature) {
    const std::size_t n = features.rows(), k = centroids.rows();
    SDR_CHECK_SHAPE(assignment.rows() == n && assignment.cols() == k,
                    "centroid_loss: assignment shape mismatch");
    SDR_CHECK(temperature > 0.0, "centroid_loss: temperature must be positive");

    Tensor2D s = matmul_abt(features, centroids); // n x k
    const double scale_n = static_cast<double>(n);

    CentroidLoss out{0.0, Tensor2D(0, 0)};
    Tensor2D dl_ds(n, k);
    std::vector<double> logits(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) logits[j] = s(i, j) / temperature;
        const double lse = logsumexp(logits);
        double row_mass = 0.0;
        for (std::size_t j = 0; j < k; ++j) row_mass += scale_n * assignment(i, j);
        for (std::size_t j = 0; j < k; ++j) {
            const double q = scale_n * assignment(i, j);
            const double log_p = logits[j] - lse;
            out.loss -= q * log_p;
            dl_ds(i, j) = (row_mass * std::exp(log_p) - q) / temperature;
        }
    }
    out.grad = matmul_atb(dl_ds, features); // k x d
    return out;
}

void centroid_step(const FeatureTable& table, const Tensor2D& assignment, Tensor2D& centroids,
                   SgdState& state, double temperature) {
    auto cl = centroid_loss(table.features, assignment, centroids, temperature);
    auto [it, inserted] =
        state.velocity.try_emplace("centroids", centroids.rows(), centroids.cols());
    sgd_step(centroids, cl.grad, it->second, state.opts);
    // a zero-lr step moves nothing; re-projecting would still churn low bits
    if (state.opts.learning_rate != 0.0) l2_normalize_rows(centroids);
}

ClusterModel cluster(const FeatureTable& table, std::size_t k, std::size_t epochs, Rng& rng,
                     const ClusterConfig& config) {
    table.validate();
    const std::size_t n = table.count();
    SDR_CHECK(k >= 1, "cluster: k must be at least 1");
    if (k > n)
        throw ConfigError("cluster: k=" + std::to_string(k) + " exceeds sample count n=" +
                          std::to_string(n));

    Tensor2D centroids(k, table.dim());
    const auto seeds = rng.sample_without_replacement(n, k);
    for (std::size_t j = 0; j < k; ++j) {
        const auto row = table.features.row(seeds[j]);
        std::copy(row.begin(), row.end(), centroids.row(j).begin());
    }

    SgdState state;
    state.opts = {.learning_rate = config.centroid_lr, .momentum = config.centroid_momentum};
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        Tensor2D s = score_matrix(table, centroids);
        auto assignment =
            sinkhorn(s, config.epsilon, config.sinkhorn_iters, config.sinkhorn_tol);
        centroid_step(table, assignment.assignment, centroids, state, config.temperature);
    }

    ClusterModel model;
    model.epsilon = config.epsilon;
    Tensor2D s = score_matrix(table, centroids);
    model.soft_assignment =
        sinkhorn(s, config.epsilon, config.sinkhorn_iters, config.sinkhorn_tol).assignment;
    model.centroids = std::move(centroids);
    model.hard_labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (s(i, j) > s(i, best)) best = j;
        model.hard_labels[i] = best;
    }
    return model;
}

DatasetSplit split_dataset(const std::vector<std::size_t>& labels, std::size_t k) {
    SDR_CHECK(k >= 1, "split_dataset: k must be at least 1");
    DatasetSplit split;
    split.total = labels.size();
    split.subsets.assign(k, {});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        SDR_CHECK(labels[i] < k, "split_dataset: label out of range");
        split.subsets[labels[i]].push_back(i);
    }
    for (std::size_t j = 0; j < k; ++j)
        if (split.subsets[j].empty())
            throw EmptyClusterError(
                "split_dataset: cluster " + std::to_string(j) +
                " is empty; re-run clustering with a different seed or a smaller k");
    return split;
}

} // namespace sdr
