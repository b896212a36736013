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
#include <utility>
#include <vector>

#include "sdr/clustering.hpp"
#include "sdr/sdrnet.hpp"

namespace sdr {

struct AugmentConfig {
    double gaussian_noise_sigma = 0.0;
    double mask_prob = 0.0;
    double scale_jitter = 0.0; // multiplicative range 1 +- jitter

    void validate() const;
};

/// Two independently augmented views per row: coordinate masking, additive
/// Gaussian noise, then a uniform scale draw. Draw counts per view are fixed
/// (d + d + 1) regardless of knob values, so the stream layout never depends
/// on the configuration.
std::pair<Tensor2D, Tensor2D> augment(const Tensor2D& batch, Rng& rng, const AugmentConfig& cfg);

/// Loss value plus upstream gradients for the two views. d_z* are the direct
/// gradients on projections (zero whenever projections appear only behind
/// stop-gradient); d_p* are gradients on predictions. All gradients are
/// batch-mean scaled.
struct LossGrads {
    double loss = 0.0;
    Tensor2D d_p1, d_p2;
    Tensor2D d_z1, d_z2;
};

/// Symmetrized consistency loss: mean over the batch of
/// 0.5*[negcos(p1, stopgrad(z2)) + negcos(p2, stopgrad(z1))].
LossGrads simsiam_loss(const Tensor2D& z1, const Tensor2D& z2, const Tensor2D& p1,
                       const Tensor2D& p2);

/// Unilateral distillation: sub-net predictions chase frozen full-net
/// projections, mean over batch of
/// 0.5*[negcos(p2, stopgrad(zs1)) + negcos(p1, stopgrad(zs2))].
/// Gradients flow to the sub-net side only.
LossGrads siamkd_loss(const Tensor2D& sub_p1, const Tensor2D& sub_p2, const Tensor2D& super_z1,
                      const Tensor2D& super_z2);

/// Ablation variant: mean squared error between sub-net and frozen full-net
/// projections, symmetrized over the two views.
LossGrads l2_distill_loss(const Tensor2D& sub_z1, const Tensor2D& sub_z2,
                          const Tensor2D& super_z1, const Tensor2D& super_z2);

/// Active network space N(phase): the full net alone at phase 0; from phase
/// p >= 1 also every path whose first L-p digits are zero (paths differing
/// only in the trailing p blocks). N(L) holds the full net plus all g^L
/// paths.
std::vector<NetTarget> phase_space(std::size_t phase, std::size_t groups, std::size_t blocks);

/// Mean over dimensions of the per-dimension standard deviation of
/// row-normalized features. Healthy representations sit near 1/sqrt(d);
/// collapsed ones near zero.
double collapse_metric(const Tensor2D& features);

enum class DistillMode { siamkd, l2 };

struct TrainConfig {
    SgdOptions sgd;
    AugmentConfig augment;
    std::size_t batch_size = 64;
    double lambda_kd = 1.0;
    DistillMode distill = DistillMode::siamkd;
    std::vector<std::size_t> steps_per_phase; // length L+1
    bool cosine_decay = false;

    void validate(std::size_t blocks) const;
};

struct StepMetrics {
    std::size_t step = 0;
    std::size_t phase = 0;
    std::string target_label; // "full" or the path index
    double loss = 0.0;     // consistency term
    double kd = 0.0;       // distillation term (0 for full-net steps)
    double collapse = 0.0; // collapse_metric of the view-1 batch backbone
};

/// `step=<n> phase=<p> target=<full|path-index> loss=<v> kd=<v> collapse=<v>`
std::string render_metrics_line(const StepMetrics& m);

using MetricsSink = std::function<void(const StepMetrics&)>;

struct TrainState {
    Rng rng;    // one stream: initialization draws first, then training draws
    SdrNet net; // initialized from rng, so a seed pins every weight
    SgdState sgd;
    std::size_t phase = 0;
    std::size_t step = 0;

    TrainState(NetConfig cfg, std::uint64_t seed) : rng(seed), net(std::move(cfg), rng) {}
};

/// One optimization step of the sampled target on an already-drawn batch:
/// augment, forward both views, consistency loss (plus distillation for
/// sub-nets), backward, SGD on exactly the target's parameter view.
StepMetrics train_step(TrainState& state, const NetTarget& target, const Tensor2D& batch,
                       const TrainConfig& cfg);

/// Full pre-training loop over the progressive phase schedule. Subset j
/// trains the path with index j; the full net trains on all samples. Emits
/// one metrics record per step.
SdrNet train(const NetConfig& net_cfg, const TrainConfig& cfg, const DatasetSplit& splits,
             const Tensor2D& samples, std::uint64_t seed, const MetricsSink& sink);

} // namespace sdr
