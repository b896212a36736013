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

#include <string>
#include <utility>
#include <vector>

#include "sdr/checkpoint.hpp"
#include "sdr/config.hpp"
#include "sdr/dataset.hpp"
#include "sdr/report.hpp"
#include "sdr/routing.hpp"
#include "sdr/ssl.hpp"
#include "sdr/synthetic.hpp"

namespace sdr::pipeline {

/// Artifact locations inside one output directory.
struct Paths {
    std::string out;

    std::string dataset_csv() const { return out + "/dataset.csv"; }
    std::string truth_tsv() const { return out + "/truth.tsv"; }
    std::string task_train_csv(std::size_t c) const {
        return out + "/task_super" + std::to_string(c) + ".train.csv";
    }
    std::string task_eval_csv(std::size_t c) const {
        return out + "/task_super" + std::to_string(c) + ".eval.csv";
    }
    std::string base_ckpt() const { return out + "/base.ckpt"; }
    std::string features_ckpt() const { return out + "/features.ckpt"; }
    std::string splits_tsv() const { return out + "/splits.tsv"; }
    std::string sdr_ckpt() const { return out + "/sdr.ckpt"; }
    std::string metrics_log() const { return out + "/metrics.log"; }
    std::string route_txt(const std::string& task_name) const {
        return out + "/route_" + task_name + ".txt";
    }
    std::string subnet_ckpt(std::size_t path_index) const {
        return out + "/subnet_" + std::to_string(path_index) + ".ckpt";
    }
    std::string report_txt() const { return out + "/report.txt"; }
    std::string gains_dat() const { return out + "/gains.dat"; }
};

// -- checkpoint packing -----------------------------------------------------

void save_net_checkpoint(const std::string& path, const SdrNet& net, const Config& config,
                         const std::string& kind, std::size_t step, std::size_t phase);
/// Rebuilds the network from the arch.* metadata; parameter values load by
/// name and must match the architecture exactly.
SdrNet load_net_checkpoint(const std::string& path);

void save_features(const std::string& path, const Tensor2D& features, const Config& config);
FeatureTable load_features(const std::string& path);

void save_subnet_checkpoint(const std::string& path, const ExportedSubnet& subnet,
                            const Config& config, std::size_t path_index);
std::pair<SdrNet, BnStats> load_subnet_checkpoint(const std::string& path);

// -- pipeline stages ----------------------------------------------------------

/// Synthetic dataset plus one nested classification task per supercluster.
void gen_data_stage(const Config& config, const Paths& paths);

/// Plain consistency pre-training of the g=1 twin on the whole dataset.
void pretrain_base_stage(const Config& config, const Paths& paths);

/// Backbone features of every sample from the base network, unit rows.
void extract_features_stage(const Config& config, const Paths& paths);

/// Entropic assignment of the frozen features into k balanced clusters.
void cluster_stage(const Config& config, const Paths& paths);

/// Progressive pre-training of the routed network on the cluster split.
void pretrain_sdr_stage(const Config& config, const Paths& paths);

/// kNN evaluation of every sub-net on a task read from csv files.
RouteReport route_stage(const Config& config, const Paths& paths,
                        const std::string& task_train_csv, const std::string& task_eval_csv,
                        const std::string& task_name);

/// Standalone checkpoint for one path.
void export_stage(const Config& config, const Paths& paths, std::size_t path_index);

/// Accuracy tables + gain histogram (+ gnuplot columns when asked).
std::string report_stage(const Config& config, const Paths& paths,
                         const std::vector<std::string>& route_files,
                         const std::string& metrics_file, bool gnuplot);

} // namespace sdr::pipeline
