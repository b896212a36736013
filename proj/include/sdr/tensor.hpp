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
#include <initializer_list>
#include <span>
#include <vector>

#include "sdr/common.hpp"

namespace sdr {

/// Default guard for l2 normalization of (near-)zero vectors.
inline constexpr double kNormEps = 1e-12;

/// Dense row-major matrix of 64-bit reals. The universal numeric carrier:
/// features, centroids, assignments, weights and activations all live here.
class Tensor2D {
public:
    Tensor2D() = default;
    Tensor2D(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Tensor2D from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Tensor2D& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    void fill(double v);
    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Matrix products. The transposed variants avoid materializing transposes in
// the gradient code: abt(a,b) = a * b^T, atb(a,b) = a^T * b.
Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);
Tensor2D matmul_abt(const Tensor2D& a, const Tensor2D& b);
Tensor2D matmul_atb(const Tensor2D& a, const Tensor2D& b);

Tensor2D transpose(const Tensor2D& a);

void add_inplace(Tensor2D& a, const Tensor2D& b);
void scale_inplace(Tensor2D& a, double s);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// v / max(||v||_2, eps). The zero vector passes through unchanged.
std::vector<double> l2_normalize(std::span<const double> v, double eps = kNormEps);
void l2_normalize_inplace(std::span<double> v, double eps = kNormEps);
void l2_normalize_rows(Tensor2D& m, double eps = kNormEps);

/// -<a,b> / (max(||a||,eps) * max(||b||,eps)); in [-1, 1].
double neg_cosine(std::span<const double> a, std::span<const double> b, double eps = kNormEps);

/// Gradient of neg_cosine(a, b) with respect to a; b is held fixed.
std::vector<double> neg_cosine_grad(std::span<const double> a, std::span<const double> b,
                                    double eps = kNormEps);

} // namespace sdr
