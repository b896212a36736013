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
#include "sdr/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace sdr {

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    SDR_CHECK_SHAPE(data_.size() == rows_ * cols_,
                    "Tensor2D: data length does not match rows*cols");
}

Tensor2D Tensor2D::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Tensor2D out(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        SDR_CHECK_SHAPE(row.size() == c, "Tensor2D::from_rows: ragged rows");
        std::copy(row.begin(), row.end(), out.data().begin() + i * c);
        ++i;
    }
    return out;
}

void Tensor2D::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2D::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
    SDR_CHECK_SHAPE(a.cols() == b.rows(), "matmul: inner dimensions disagree");
    Tensor2D c(a.rows(), b.cols());
    const std::size_t n = a.cols(), p = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.data().data() + i * p;
        const double* ai = a.data().data() + i * n;
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.data().data() + k * p;
            for (std::size_t j = 0; j < p; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Tensor2D matmul_abt(const Tensor2D& a, const Tensor2D& b) {
    SDR_CHECK_SHAPE(a.cols() == b.cols(), "matmul_abt: inner dimensions disagree");
    Tensor2D c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j)
            c(i, j) = dot(a.row(i), b.row(j));
    return c;
}

Tensor2D matmul_atb(const Tensor2D& a, const Tensor2D& b) {
    SDR_CHECK_SHAPE(a.rows() == b.rows(), "matmul_atb: inner dimensions disagree");
    Tensor2D c(a.cols(), b.cols());
    const std::size_t n = a.cols(), p = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ak = a.data().data() + k * n;
        const double* bk = b.data().data() + k * p;
        for (std::size_t i = 0; i < n; ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = c.data().data() + i * p;
            for (std::size_t j = 0; j < p; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

Tensor2D transpose(const Tensor2D& a) {
    Tensor2D t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void add_inplace(Tensor2D& a, const Tensor2D& b) {
    SDR_CHECK_SHAPE(a.same_shape(b), "add_inplace: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

void scale_inplace(Tensor2D& a, double s) {
    for (double& v : a.data()) v *= s;
}

double dot(std::span<const double> a, std::span<const double> b) {
    SDR_CHECK_SHAPE(a.size() == b.size(), "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::vector<double> l2_normalize(std::span<const double> v, double eps) {
    std::vector<double> out(v.begin(), v.end());
    l2_normalize_inplace(out, eps);
    return out;
}

void l2_normalize_inplace(std::span<double> v, double eps) {
    SDR_CHECK(eps > 0.0, "l2_normalize: eps must be positive");
    const double inv = 1.0 / std::max(l2_norm(v), eps);
    for (double& x : v) x *= inv;
}

void l2_normalize_rows(Tensor2D& m, double eps) {
    for (std::size_t i = 0; i < m.rows(); ++i) l2_normalize_inplace(m.row(i), eps);
}

double neg_cosine(std::span<const double> a, std::span<const double> b, double eps) {
    const double na = std::max(l2_norm(a), eps);
    const double nb = std::max(l2_norm(b), eps);
    return -dot(a, b) / (na * nb);
}

std::vector<double> neg_cosine_grad(std::span<const double> a, std::span<const double> b,
                                    double eps) {
    // d/da of -<a,b>/(|a||b|) = (cos * a_hat - b_hat) / |a|, with cos = <a_hat,b_hat>.
    // Below the eps guard the denominator is clamped constant and only the
    // bilinear term differentiates.
    const double raw_na = l2_norm(a);
    const double na = std::max(raw_na, eps);
    const double nb = std::max(l2_norm(b), eps);
    std::vector<double> g(a.size());
    if (raw_na < eps) {
        for (std::size_t i = 0; i < a.size(); ++i) g[i] = -b[i] / (na * nb);
        return g;
    }
    const double c = dot(a, b) / (na * nb);
    for (std::size_t i = 0; i < a.size(); ++i) g[i] = (c * a[i] / na - b[i] / nb) / na;
    return g;
}

} // namespace sdr
