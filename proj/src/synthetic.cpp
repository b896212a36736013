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
#include "sdr/synthetic.hpp"

#include "sdr/rng.hpp"

namespace sdr {

namespace {

std::vector<double> random_unit(std::size_t d, Rng& rng) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    l2_normalize_inplace(v);
    return v;
}

/// The deterministic prefix of the generation stream: supercluster means and
/// each region's sub-cluster offset directions. The directions double as the
/// region's semantic subspace; nested tasks draw their class structure from
/// the same span.
struct MixtureLayout {
    std::vector<std::vector<double>> super_means;             // S x d
    std::vector<std::vector<std::vector<double>>> directions; // S x C x d, unit
};

MixtureLayout mixture_layout(const SyntheticSpec& spec, Rng& rng) {
    MixtureLayout layout;
    layout.super_means.reserve(spec.superclusters);
    for (std::size_t s = 0; s < spec.superclusters; ++s) {
        auto u = random_unit(spec.dim, rng);
        for (double& x : u) x *= spec.separation;
        layout.super_means.push_back(std::move(u));
    }
    layout.directions.resize(spec.superclusters);
    for (std::size_t s = 0; s < spec.superclusters; ++s) {
        layout.directions[s].reserve(spec.subclusters);
        for (std::size_t c = 0; c < spec.subclusters; ++c)
            layout.directions[s].push_back(random_unit(spec.dim, rng));
    }
    return layout;
}

} // namespace

void SyntheticSpec::validate() const {
    SDR_CHECK(superclusters >= 1, "SyntheticSpec: need at least one supercluster");
    SDR_CHECK(subclusters >= 1, "SyntheticSpec: need at least one sub-cluster");
    SDR_CHECK(samples_per_subcluster >= 1, "SyntheticSpec: need samples");
    SDR_CHECK(dim >= 2, "SyntheticSpec: dim must be >= 2");
    SDR_CHECK(separation >= 0.0 && noise >= 0.0, "SyntheticSpec: negative scale");
}

std::vector<std::vector<double>> supercluster_means(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    return mixture_layout(spec, rng).super_means;
}

std::vector<std::vector<double>> region_directions(const SyntheticSpec& spec,
                                                   std::size_t supercluster) {
    spec.validate();
    SDR_CHECK(supercluster < spec.superclusters,
              "region_directions: supercluster index out of range");
    Rng rng(spec.seed);
    return mixture_layout(spec, rng).directions[supercluster];
}

SyntheticData gen_data(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const MixtureLayout layout = mixture_layout(spec, rng);

    SyntheticData data;
    const std::size_t n = spec.total_samples();
    data.samples = Tensor2D(n, spec.dim);
    data.supercluster.resize(n);
    data.subcluster.resize(n);
    std::size_t row = 0;
    for (std::size_t s = 0; s < spec.superclusters; ++s) {
        for (std::size_t c = 0; c < spec.subclusters; ++c) {
            std::vector<double> mean(spec.dim);
            for (std::size_t j = 0; j < spec.dim; ++j)
                mean[j] = layout.super_means[s][j] +
                          0.25 * spec.separation * layout.directions[s][c][j];
            for (std::size_t i = 0; i < spec.samples_per_subcluster; ++i, ++row) {
                for (std::size_t j = 0; j < spec.dim; ++j)
                    data.samples(row, j) = mean[j] + spec.noise * rng.normal();
                data.supercluster[row] = s;
                data.subcluster[row] = s * spec.subclusters + c;
            }
        }
    }
    if (spec.normalize) l2_normalize_rows(data.samples);
    return data;
}

void TaskSpec::validate() const {
    SDR_CHECK(classes >= 2, "TaskSpec: need at least two classes");
    SDR_CHECK(train_per_class >= 1 && eval_per_class >= 1, "TaskSpec: need samples per class");
    SDR_CHECK(offset >= 0.0 && noise >= 0.0, "TaskSpec: negative scale");
}

DownstreamTask gen_task(const SyntheticSpec& data_spec, const TaskSpec& task_spec) {
    task_spec.validate();
    SDR_CHECK(task_spec.supercluster < data_spec.superclusters,
              "TaskSpec: supercluster index out of range");
    Rng layout_rng(data_spec.seed);
    const MixtureLayout layout = mixture_layout(data_spec, layout_rng);
    const auto& center = layout.super_means[task_spec.supercluster];
    const auto& span = layout.directions[task_spec.supercluster];

    Rng rng(task_spec.seed);
    // class means live in the span of the region's own sub-cluster
    // directions: the directions this region's data actually varies in
    std::vector<std::vector<double>> class_means;
    for (std::size_t c = 0; c < task_spec.classes; ++c) {
        std::vector<double> dir(data_spec.dim, 0.0);
        for (const auto& basis : span) {
            const double w = rng.normal();
            for (std::size_t j = 0; j < data_spec.dim; ++j) dir[j] += w * basis[j];
        }
        l2_normalize_inplace(dir);
        std::vector<double> mean(data_spec.dim);
        for (std::size_t j = 0; j < data_spec.dim; ++j)
            mean[j] = center[j] + task_spec.offset * dir[j];
        class_means.push_back(std::move(mean));
    }

    auto draw_split = [&](std::size_t per_class, LabeledSet& out) {
        out.samples = Tensor2D(per_class * task_spec.classes, data_spec.dim);
        out.labels.resize(per_class * task_spec.classes);
        std::size_t row = 0;
        for (std::size_t c = 0; c < task_spec.classes; ++c) {
            for (std::size_t i = 0; i < per_class; ++i, ++row) {
                for (std::size_t j = 0; j < data_spec.dim; ++j)
                    out.samples(row, j) = class_means[c][j] + task_spec.noise * rng.normal();
                out.labels[row] = static_cast<int>(c);
            }
        }
        if (data_spec.normalize) l2_normalize_rows(out.samples);
    };

    DownstreamTask task;
    task.name = "super" + std::to_string(task_spec.supercluster);
    draw_split(task_spec.train_per_class, task.train);
    draw_split(task_spec.eval_per_class, task.eval);
    task.validate();
    return task;
}

} // namespace sdr
