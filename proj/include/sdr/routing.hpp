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
#include <vector>

#include "sdr/clustering.hpp"
#include "sdr/sdrnet.hpp"

namespace sdr {

struct LabeledSet {
    Tensor2D samples;
    std::vector<int> labels;
};

struct DownstreamTask {
    std::string name;
    LabeledSet train;
    LabeledSet eval;

    /// Eval labels must all appear in the train split.
    void validate() const;
};

struct RouteReport {
    std::string task_name;
    std::size_t knn_k = 0;
    std::uint64_t seed = 0;
    std::size_t groups = 0;
    std::size_t blocks = 0;
    std::vector<double> path_accuracy; // g^L entries, index order
    double full_accuracy = 0.0;
    bool best_is_full = false;
    std::size_t best_path = 0;
    double best_accuracy = 0.0;
    std::string tie_note;
};

/// Deterministic text form: task/k/seed/tiebreak header, one line per path
/// sorted by index, the full-net reference entry, then the best line.
std::string render_route_report(const RouteReport& report);

struct RoutingConfig {
    std::size_t knn_k = 200;
    std::size_t bn_batch = 64;
    std::size_t threads = 0; // 0 = hardware; SDR_THREADS caps either way
    bool weighted_vote = false;
};

/// Row-normalized backbone representations from an eval-mode forward.
/// Requires calibrated statistics for the target.
Tensor2D extract_features(const SdrNet& net, const NetTarget& target, const Tensor2D& samples,
                          const BnStats& bn);

/// Cosine-similarity kNN over unit-normalized features. Neighbor cut is
/// ordered by (similarity desc, train index asc); majority vote breaks ties
/// by higher summed similarity, then lower class id. k clips to the training
/// set size. The weighted flag votes by summed similarity instead of counts.
std::vector<int> knn_predict(const Tensor2D& train_feats, const std::vector<int>& train_labels,
                             const Tensor2D& query_feats, std::size_t k,
                             bool weighted = false);

double knn_accuracy(const Tensor2D& train_feats, const std::vector<int>& train_labels,
                    const Tensor2D& eval_feats, const std::vector<int>& eval_labels,
                    std::size_t k, bool weighted = false);

/// Evaluates every path plus the full-net reference on the task, calibrating
/// missing BN statistics from each path's training subset. Evaluations are
/// independent and fan out across threads; the report is deterministic. The
/// full net is listed for reference and only wins when it strictly beats
/// every path.
RouteReport route(const SdrNet& net, BnStats& registry, const DatasetSplit& splits,
                  const Tensor2D& data, const DownstreamTask& task, const RoutingConfig& cfg,
                  std::uint64_t seed);

/// A path's weights re-homed into a standalone single-group network plus its
/// calibrated statistics (registered under both "full" and "path0", which
/// coincide at g=1). Forward outputs match the parent's sub-net forward bit
/// for bit.
struct ExportedSubnet {
    SdrNet net;
    std::vector<BnBlockStats> stats;
};

ExportedSubnet export_subnet(const SdrNet& net, const PathCode& path, const BnStats& registry);

} // namespace sdr
