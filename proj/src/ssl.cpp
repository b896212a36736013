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
#include "sdr/ssl.hpp"

#include <cmath>

#include "sdr/text.hpp"

namespace sdr {

void AugmentConfig::validate() const {
    SDR_CHECK(gaussian_noise_sigma >= 0.0, "AugmentConfig: noise sigma must be >= 0");
    SDR_CHECK(mask_prob >= 0.0 && mask_prob < 1.0, "AugmentConfig: mask_prob must be in [0,1)");
    SDR_CHECK(scale_jitter >= 0.0, "AugmentConfig: scale_jitter must be >= 0");
}

std::pair<Tensor2D, Tensor2D> augment(const Tensor2D& batch, Rng& rng,
                                      const AugmentConfig& cfg) {
    cfg.validate();
    const std::size_t b = batch.rows(), d = batch.cols();
    Tensor2D x1(b, d), x2(b, d);
    auto one_view = [&](std::size_t i, Tensor2D& out) {
        // fixed draw layout per view: d mask draws, d noise draws, 1 scale
        for (std::size_t j = 0; j < d; ++j) {
            const bool keep = rng.uniform() >= cfg.mask_prob;
            out(i, j) = keep ? batch(i, j) : 0.0;
        }
        for (std::size_t j = 0; j < d; ++j)
            out(i, j) += cfg.gaussian_noise_sigma * rng.normal();
        const double s = rng.uniform(1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter);
        for (std::size_t j = 0; j < d; ++j) out(i, j) *= s;
    };
    for (std::size_t i = 0; i < b; ++i) {
        one_view(i, x1);
        one_view(i, x2);
    }
    return {std::move(x1), std::move(x2)};
}

LossGrads simsiam_loss(const Tensor2D& z1, const Tensor2D& z2, const Tensor2D& p1,
                       const Tensor2D& p2) {
    SDR_CHECK_SHAPE(z1.same_shape(z2) && p1.same_shape(p2) && z1.same_shape(p1),
                    "simsiam_loss: shape mismatch");
    const std::size_t b = z1.rows();
    SDR_CHECK(b >= 1, "simsiam_loss: empty batch");

    LossGrads out;
    out.d_p1 = Tensor2D(p1.rows(), p1.cols());
    out.d_p2 = Tensor2D(p2.rows(), p2.cols());
    // projections appear only behind stop-gradient: exactly zero
    out.d_z1 = Tensor2D(z1.rows(), z1.cols());
    out.d_z2 = Tensor2D(z2.rows(), z2.cols());

    const double w = 0.5 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        out.loss += w * (neg_cosine(p1.row(i), z2.row(i)) + neg_cosine(p2.row(i), z1.row(i)));
        const auto g1 = neg_cosine_grad(p1.row(i), z2.row(i));
        const auto g2 = neg_cosine_grad(p2.row(i), z1.row(i));
        for (std::size_t j = 0; j < p1.cols(); ++j) {
            out.d_p1(i, j) = w * g1[j];
            out.d_p2(i, j) = w * g2[j];
        }
    }
    return out;
}

LossGrads siamkd_loss(const Tensor2D& sub_p1, const Tensor2D& sub_p2, const Tensor2D& super_z1,
                      const Tensor2D& super_z2) {
    SDR_CHECK_SHAPE(sub_p1.same_shape(sub_p2) && super_z1.same_shape(super_z2) &&
                        sub_p1.same_shape(super_z1),
                    "siamkd_loss: shape mismatch");
    const std::size_t b = sub_p1.rows();
    SDR_CHECK(b >= 1, "siamkd_loss: empty batch");

    LossGrads out;
    out.d_p1 = Tensor2D(sub_p1.rows(), sub_p1.cols());
    out.d_p2 = Tensor2D(sub_p2.rows(), sub_p2.cols());

    const double w = 0.5 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        out.loss +=
            w * (neg_cosine(sub_p2.row(i), super_z1.row(i)) +
                 neg_cosine(sub_p1.row(i), super_z2.row(i)));
        const auto g2 = neg_cosine_grad(sub_p2.row(i), super_z1.row(i));
        const auto g1 = neg_cosine_grad(sub_p1.row(i), super_z2.row(i));
        for (std::size_t j = 0; j < sub_p1.cols(); ++j) {
            out.d_p2(i, j) = w * g2[j];
            out.d_p1(i, j) = w * g1[j];
        }
    }
    return out;
}

LossGrads l2_distill_loss(const Tensor2D& sub_z1, const Tensor2D& sub_z2,
                          const Tensor2D& super_z1, const Tensor2D& super_z2) {
    SDR_CHECK_SHAPE(sub_z1.same_shape(super_z1) && sub_z2.same_shape(super_z2) &&
                        sub_z1.same_shape(sub_z2),
                    "l2_distill_loss: shape mismatch");
    const std::size_t b = sub_z1.rows();
    SDR_CHECK(b >= 1, "l2_distill_loss: empty batch");

    LossGrads out;
    out.d_z1 = Tensor2D(sub_z1.rows(), sub_z1.cols());
    out.d_z2 = Tensor2D(sub_z2.rows(), sub_z2.cols());

    const double w = 0.5 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < sub_z1.cols(); ++j) {
            const double e1 = sub_z1(i, j) - super_z1(i, j);
            const double e2 = sub_z2(i, j) - super_z2(i, j);
            out.loss += w * 0.5 * (e1 * e1 + e2 * e2);
            out.d_z1(i, j) = w * e1;
            out.d_z2(i, j) = w * e2;
        }
    }
    return out;
}

std::vector<NetTarget> phase_space(std::size_t phase, std::size_t groups, std::size_t blocks) {
    SDR_CHECK(phase <= blocks, "phase_space: phase out of range [0, L]");
    std::vector<NetTarget> out;
    out.push_back(NetTarget::full());
    if (phase == 0) return out;
    // paths whose leading L-phase digits are pinned to zero, index order
    std::size_t count = 1;
    for (std::size_t i = 0; i < phase; ++i) count *= groups;
    for (std::size_t suffix = 0; suffix < count; ++suffix) {
        PathCode p;
        p.digits.assign(blocks, 0);
        std::size_t rem = suffix;
        for (std::size_t l = blocks; l-- > blocks - phase;) {
            p.digits[l] = rem % groups;
            rem /= groups;
        }
        out.push_back(NetTarget::path(std::move(p)));
    }
    return out;
}

double collapse_metric(const Tensor2D& features) {
    SDR_CHECK(features.rows() >= 2, "collapse_metric: needs at least two rows");
    Tensor2D f = features;
    l2_normalize_rows(f);
    const std::size_t b = f.rows(), d = f.cols();
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < b; ++i) mean += f(i, j);
        mean /= static_cast<double>(b);
        double var = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            const double dv = f(i, j) - mean;
            var += dv * dv;
        }
        acc += std::sqrt(var / static_cast<double>(b));
    }
    return acc / static_cast<double>(d);
}

void TrainConfig::validate(std::size_t blocks) const {
    augment.validate();
    sdr::validate(sgd);
    SDR_CHECK(batch_size >= 2, "TrainConfig: batch_size must be >= 2");
    SDR_CHECK(lambda_kd >= 0.0, "TrainConfig: lambda_kd must be >= 0");
    SDR_CHECK(steps_per_phase.size() == blocks + 1,
              "TrainConfig: steps_per_phase must have one entry per phase (L+1)");
}

std::string render_metrics_line(const StepMetrics& m) {
    std::string line;
    line += "step=" + format_u64(m.step);
    line += " phase=" + format_u64(m.phase);
    line += " target=" + m.target_label;
    line += " loss=" + format_fixed(m.loss, 6);
    line += " kd=" + format_fixed(m.kd, 6);
    line += " collapse=" + format_fixed(m.collapse, 6);
    return line;
}

StepMetrics train_step(TrainState& state, const NetTarget& target, const Tensor2D& batch,
                       const TrainConfig& cfg) {
    auto [x1, x2] = augment(batch, state.rng, cfg.augment);

    ForwardCache cache1, cache2;
    auto out1 = state.net.forward(target, x1, RunMode::train, nullptr, &cache1);
    auto out2 = state.net.forward(target, x2, RunMode::train, nullptr, &cache2);

    LossGrads ssl = simsiam_loss(out1.projection, out2.projection, out1.prediction,
                                 out2.prediction);
    Tensor2D d_p1 = ssl.d_p1, d_p2 = ssl.d_p2;
    Tensor2D d_z1 = ssl.d_z1, d_z2 = ssl.d_z2;

    double kd_value = 0.0;
    if (!target.is_full() && cfg.lambda_kd > 0.0) {
        // frozen teacher pass: train-mode BN, gradients discarded
        auto sup1 = state.net.forward(NetTarget::full(), x1, RunMode::train);
        auto sup2 = state.net.forward(NetTarget::full(), x2, RunMode::train);
        LossGrads kd;
        if (cfg.distill == DistillMode::siamkd) {
            kd = siamkd_loss(out1.prediction, out2.prediction, sup1.projection,
                             sup2.projection);
            for (std::size_t i = 0; i < d_p1.size(); ++i) {
                d_p1.data()[i] += cfg.lambda_kd * kd.d_p1.data()[i];
                d_p2.data()[i] += cfg.lambda_kd * kd.d_p2.data()[i];
            }
        } else {
            kd = l2_distill_loss(out1.projection, out2.projection, sup1.projection,
                                 sup2.projection);
            for (std::size_t i = 0; i < d_z1.size(); ++i) {
                d_z1.data()[i] += cfg.lambda_kd * kd.d_z1.data()[i];
                d_z2.data()[i] += cfg.lambda_kd * kd.d_z2.data()[i];
            }
        }
        kd_value = kd.loss;
    }

    state.net.zero_grad(target);
    state.net.backward(cache1, d_z1, d_p1);
    state.net.backward(cache2, d_z2, d_p2);
    state.sgd.opts = cfg.sgd; // velocities persist in the state; options follow the config
    auto view = state.net.subnet_params(target);
    sgd_step(state.sgd, view);
    state.net.mark_mutated();

    StepMetrics m;
    m.step = state.step;
    m.phase = state.phase;
    m.target_label = target.is_full()
                         ? "full"
                         : format_u64(path_index(target.path_code(), state.net.config().groups));
    m.loss = ssl.loss;
    m.kd = kd_value;
    m.collapse = collapse_metric(cache1.backbone);
    return m;
}

SdrNet train(const NetConfig& net_cfg, const TrainConfig& cfg, const DatasetSplit& splits,
             const Tensor2D& samples, std::uint64_t seed, const MetricsSink& sink) {
    net_cfg.validate();
    cfg.validate(net_cfg.blocks);
    const std::size_t paths = net_cfg.path_count();
    if (splits.cluster_count() != paths)
        throw ConfigError("train: cluster count k=" + std::to_string(splits.cluster_count()) +
                          " must equal the path count g^L=" + std::to_string(paths));
    SDR_CHECK(splits.total == samples.rows(), "train: split indices do not match the dataset");
    for (const auto& subset : splits.subsets)
        SDR_CHECK(!subset.empty(), "train: empty cluster subset");

    TrainState state(net_cfg, seed);

    std::size_t total_steps = 0;
    for (std::size_t s : cfg.steps_per_phase) total_steps += s;
    const double base_lr = cfg.sgd.learning_rate;
    TrainConfig step_cfg = cfg;

    Tensor2D batch(cfg.batch_size, samples.cols());
    for (std::size_t phase = 0; phase <= net_cfg.blocks; ++phase) {
        state.phase = phase;
        const auto space = phase_space(phase, net_cfg.groups, net_cfg.blocks);
        for (std::size_t s = 0; s < cfg.steps_per_phase[phase]; ++s) {
            const NetTarget& target = space[state.rng.uniform_index(space.size())];

            // batch with replacement from the target's dataset
            for (std::size_t i = 0; i < cfg.batch_size; ++i) {
                std::size_t row;
                if (target.is_full()) {
                    row = state.rng.uniform_index(samples.rows());
                } else {
                    const auto& subset =
                        splits.subsets[path_index(target.path_code(), net_cfg.groups)];
                    row = subset[state.rng.uniform_index(subset.size())];
                }
                auto src = samples.row(row);
                std::copy(src.begin(), src.end(), batch.row(i).begin());
            }

            if (cfg.cosine_decay && total_steps > 0) {
                const double t = static_cast<double>(state.step) /
                                 static_cast<double>(total_steps);
                step_cfg.sgd.learning_rate =
                    base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
            }

            auto metrics = train_step(state, target, batch, step_cfg);
            ++state.step;
            if (sink) sink(metrics);
        }
    }
    return std::move(state.net);
}

} // namespace sdr
