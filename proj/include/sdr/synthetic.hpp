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

#include <cstdint>
#include <vector>

#include "sdr/routing.hpp"
#include "sdr/tensor.hpp"

namespace sdr {

/// Hierarchical Gaussian mixture: supercluster means `separation` from the
/// origin in random directions, sub-cluster means nested at separation/4,
/// samples at `noise`. Ground-truth labels ride along.
struct SyntheticSpec {
    std::size_t superclusters = 4;
    std::size_t subclusters = 1; // per supercluster
    std::size_t samples_per_subcluster = 500;
    std::size_t dim = 32;
    double separation = 6.0;
    double noise = 1.0;
    bool normalize = false;
    std::uint64_t seed = 42;

    std::size_t total_samples() const {
        return superclusters * subclusters * samples_per_subcluster;
    }
    void validate() const;
};

struct SyntheticData {
    Tensor2D samples;
    std::vector<std::size_t> supercluster; // per-sample ground truth
    std::vector<std::size_t> subcluster;   // global sub-cluster id
};

SyntheticData gen_data(const SyntheticSpec& spec);

/// The supercluster means the generator would draw for this spec; a prefix
/// of the generation stream, so task sampling can target a region exactly.
std::vector<std::vector<double>> supercluster_means(const SyntheticSpec& spec);

/// The sub-cluster offset directions of one region: the directions its data
/// varies in, and the span nested tasks draw their classes from.
std::vector<std::vector<double>> region_directions(const SyntheticSpec& spec,
                                                   std::size_t supercluster);

/// A classification task nested inside one supercluster: `classes` fresh
/// Gaussian blobs at `offset` from the supercluster mean around which train
/// and eval splits are drawn disjointly.
struct TaskSpec {
    std::size_t supercluster = 0;
    std::size_t classes = 4;
    std::size_t train_per_class = 100;
    std::size_t eval_per_class = 25;
    double offset = 1.5;
    double noise = 0.5;
    std::uint64_t seed = 1;

    void validate() const;
};

DownstreamTask gen_task(const SyntheticSpec& data_spec, const TaskSpec& task_spec);

} // namespace sdr
