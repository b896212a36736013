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

// Brute-force and closed-form oracles used by the test suites. Everything in
// this header is deliberately independent of the implementation paths it
// checks: plain enumeration, plain sorting, textbook formulas.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "sdr/clustering.hpp"
#include "sdr/rng.hpp"
#include "sdr/tensor.hpp"

namespace sdr::test {

inline double grad_rel_err(std::span<const double> got, std::span<const double> want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        num += (got[i] - want[i]) * (got[i] - want[i]);
        den += want[i] * want[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

/// Exhaustive grid search of Tr(U^T S) + eps*H(U) over the transportation
/// polytope with uniform marginals. Free cells are the leading
/// (n-1) x (k-1) block; the rest is determined by the marginals. Each free
/// cell ranges over the grid {lo_f, lo_f+step, ...} clamped to [0, cellmax].
/// Returns the best objective over all feasible grid points.
class OtGridOracle {
public:
    OtGridOracle(const Tensor2D& scores, double eps) : s_(scores), eps_(eps) {
        n_ = s_.rows();
        k_ = s_.cols();
        row_t_ = 1.0 / static_cast<double>(n_);
        col_t_ = 1.0 / static_cast<double>(k_);
        free_ = (n_ - 1) * (k_ - 1);
    }

    double search(double step) {
        std::vector<double> lo(free_, 0.0), hi(free_, std::min(row_t_, col_t_));
        return search_box(step, lo, hi);
    }

    /// Coarse pass over the whole polytope, then a fine pass restricted to a
    /// one-coarse-cell box around the best coarse point. The objective is
    /// strictly concave, so the fine optimum lives next to the coarse one.
    double search_refined(double coarse, double fine) {
        if (free_ == 0) return eval_determined({});
        std::vector<double> lo(free_, 0.0), hi(free_, std::min(row_t_, col_t_));
        search_box(coarse, lo, hi);
        for (std::size_t f = 0; f < free_; ++f) {
            lo[f] = std::max(0.0, best_point_[f] - coarse);
            hi[f] = std::min(std::min(row_t_, col_t_), best_point_[f] + coarse);
        }
        return search_box(fine, lo, hi);
    }

    const std::vector<double>& best_point() const { return best_point_; }

private:
    double search_box(double step, const std::vector<double>& lo, const std::vector<double>& hi) {
        best_ = -std::numeric_limits<double>::infinity();
        point_.assign(free_, 0.0);
        if (free_ == 0) {
            best_ = eval_determined(point_);
            best_point_ = point_;
            return best_;
        }
        recurse(0, step, lo, hi);
        return best_;
    }

    void recurse(std::size_t f, double step, const std::vector<double>& lo,
                 const std::vector<double>& hi) {
        if (f == free_) {
            const double obj = eval_determined(point_);
            if (obj > best_) {
                best_ = obj;
                best_point_ = point_;
            }
            return;
        }
        for (double v = lo[f]; v <= hi[f] + 1e-12; v += step) {
            point_[f] = v;
            if (!partial_feasible(f)) continue;
            recurse(f + 1, step, lo, hi);
        }
    }

    bool partial_feasible(std::size_t f) const {
        // cells are filled row-major over the free block; bound the partial
        // row and column sums by their marginals
        const std::size_t i = f / (k_ - 1);
        const std::size_t j = f % (k_ - 1);
        double row_sum = 0.0;
        for (std::size_t jj = 0; jj <= j; ++jj) row_sum += point_[i * (k_ - 1) + jj];
        if (row_sum > row_t_ + 1e-12) return false;
        double col_sum = 0.0;
        for (std::size_t ii = 0; ii <= i; ++ii) col_sum += point_[ii * (k_ - 1) + j];
        if (col_sum > col_t_ + 1e-12) return false;
        return true;
    }

    double eval_determined(const std::vector<double>& freev) const {
        Tensor2D u(n_, k_);
        for (std::size_t i = 0; i + 1 < n_; ++i)
            for (std::size_t j = 0; j + 1 < k_; ++j) u(i, j) = freev[i * (k_ - 1) + j];
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            double row_sum = 0.0;
            for (std::size_t j = 0; j + 1 < k_; ++j) row_sum += u(i, j);
            u(i, k_ - 1) = row_t_ - row_sum;
        }
        for (std::size_t j = 0; j < k_; ++j) {
            double col_sum = 0.0;
            for (std::size_t i = 0; i + 1 < n_; ++i) col_sum += u(i, j);
            u(n_ - 1, j) = col_t_ - col_sum;
        }
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (u.data()[i] < -1e-12) return -std::numeric_limits<double>::infinity();
            if (u.data()[i] < 0.0) u.data()[i] = 0.0;
        }
        return entropic_objective(u, s_, eps_);
    }

    Tensor2D s_;
    double eps_;
    std::size_t n_ = 0, k_ = 0, free_ = 0;
    double row_t_ = 0.0, col_t_ = 0.0;
    double best_ = 0.0;
    std::vector<double> point_, best_point_;
};

/// Nearest-centroid labels by exhaustive scan; used to cross-check cluster().
inline std::vector<std::size_t> nearest_centroid_oracle(const Tensor2D& features,
                                                        const Tensor2D& centroids) {
    std::vector<std::size_t> labels(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < centroids.rows(); ++j) {
            const double s = dot(features.row(i), centroids.row(j));
            if (s > best) {
                best = s;
                labels[i] = j;
            }
        }
    }
    return labels;
}

/// Adjusted Rand index between two labelings (textbook pair-counting form).
inline double adjusted_rand_index(const std::vector<std::size_t>& a,
                                  const std::vector<std::size_t>& b) {
    const std::size_t n = a.size();
    std::map<std::pair<std::size_t, std::size_t>, double> joint;
    std::map<std::size_t, double> ca, cb;
    for (std::size_t i = 0; i < n; ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
    }
    auto comb2 = [](double m) { return m * (m - 1.0) / 2.0; };
    double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (auto& [key, v] : joint) sum_joint += comb2(v);
    for (auto& [key, v] : ca) sum_a += comb2(v);
    for (auto& [key, v] : cb) sum_b += comb2(v);
    const double total = comb2(static_cast<double>(n));
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (sum_joint - expected) / (max_index - expected);
}

/// Random orthogonal matrix via Gram-Schmidt on a random Gaussian matrix.
inline Tensor2D random_orthogonal(std::size_t d, Rng& rng) {
    Tensor2D q(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        std::vector<double> v(d);
        for (double& x : v) x = rng.normal();
        for (std::size_t j = 0; j < i; ++j) {
            const double proj = dot({v.data(), d}, q.row(j));
            for (std::size_t c = 0; c < d; ++c) v[c] -= proj * q(j, c);
        }
        l2_normalize_inplace(v, 1e-12);
        std::copy(v.begin(), v.end(), q.row(i).begin());
    }
    return q;
}

/// kNN by full sort with the tie rules spelled out: neighbors ordered by
/// (similarity desc, train index asc); vote by count, then summed similarity,
/// then lower class id.
inline std::vector<int> knn_oracle(const Tensor2D& train, const std::vector<int>& labels,
                                   const Tensor2D& queries, std::size_t k) {
    const std::size_t n = train.rows();
    const std::size_t kk = std::min(k, n);
    std::vector<int> out(queries.rows());
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        std::vector<std::pair<double, std::size_t>> sims(n);
        for (std::size_t i = 0; i < n; ++i) sims[i] = {dot(queries.row(q), train.row(i)), i};
        std::sort(sims.begin(), sims.end(), [](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first > y.first;
            return x.second < y.second;
        });
        std::map<int, std::pair<std::size_t, double>> votes; // label -> (count, sim sum)
        for (std::size_t i = 0; i < kk; ++i) {
            auto& v = votes[labels[sims[i].second]];
            v.first += 1;
            v.second += sims[i].first;
        }
        // map iteration is label-ascending, so strict improvement keeps the
        // lowest class id on full ties
        int best_label = votes.begin()->first;
        auto best = votes.begin()->second;
        for (auto& [label, v] : votes) {
            if (v.first > best.first || (v.first == best.first && v.second > best.second)) {
                best_label = label;
                best = v;
            }
        }
        out[q] = best_label;
    }
    return out;
}

} // namespace sdr::test
