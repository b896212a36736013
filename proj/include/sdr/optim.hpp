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

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sdr/tensor.hpp"

namespace sdr {

/// A named value/gradient pair. Networks own Params; optimizers and views
/// reference them.
struct Param {
    std::string name;
    Tensor2D value;
    Tensor2D grad;

    Param() = default;
    Param(std::string n, Tensor2D v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor2D(value.rows(), value.cols());
    }

    void zero_grad() { grad.fill(0.0); }
};

struct SgdOptions {
    double learning_rate = 0.0;
    double momentum = 0.0;
    double weight_decay = 0.0;
};

void validate(const SgdOptions& o);

/// SGD with momentum and weight decay. Velocity buffers are keyed by
/// parameter name and created on first touch, shaped like the parameter.
/// Update rule: v <- momentum*v + grad + weight_decay*param;
///              param <- param - lr*v.
struct SgdState {
    SgdOptions opts;
    std::map<std::string, Tensor2D> velocity;
};

void sgd_step(Tensor2D& param, const Tensor2D& grad, Tensor2D& velocity, const SgdOptions& opts);
void sgd_step(SgdState& state, std::span<Param* const> params);

/// Central-difference gradient: (f(x + h e_i) - f(x - h e_i)) / (2h) per
/// coordinate. The testing oracle for every hand-derived gradient here.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h);

} // namespace sdr
