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
#include "sdr/optim.hpp"

#include <cmath>

namespace sdr {

void validate(const SgdOptions& o) {
    SDR_CHECK(o.learning_rate >= 0.0, "SgdOptions: learning_rate must be >= 0");
    SDR_CHECK(o.momentum >= 0.0 && o.momentum < 1.0, "SgdOptions: momentum must be in [0,1)");
    SDR_CHECK(o.weight_decay >= 0.0, "SgdOptions: weight_decay must be >= 0");
}

void sgd_step(Tensor2D& param, const Tensor2D& grad, Tensor2D& velocity, const SgdOptions& opts) {
    SDR_CHECK_SHAPE(param.same_shape(grad), "sgd_step: grad shape mismatch");
    SDR_CHECK_SHAPE(param.same_shape(velocity), "sgd_step: velocity shape mismatch");
    const double m = opts.momentum, wd = opts.weight_decay, lr = opts.learning_rate;
    for (std::size_t i = 0; i < param.size(); ++i) {
        double v = m * velocity.data()[i] + grad.data()[i] + wd * param.data()[i];
        velocity.data()[i] = v;
        param.data()[i] -= lr * v;
    }
}

void sgd_step(SgdState& state, std::span<Param* const> params) {
    validate(state.opts);
    for (Param* p : params) {
        auto [it, inserted] =
            state.velocity.try_emplace(p->name, p->value.rows(), p->value.cols());
        sgd_step(p->value, p->grad, it->second, state.opts);
    }
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h) {
    SDR_CHECK(h > 0.0, "finite_diff_grad: h must be positive");
    std::vector<double> xe(x.begin(), x.end());
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = xe[i];
        xe[i] = orig + h;
        const double fp = f(xe);
        xe[i] = orig - h;
        const double fm = f(xe);
        xe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_grad: objective returned a non-finite value");
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

} // namespace sdr
