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
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdr/optim.hpp"
#include "sdr/rng.hpp"
#include "sdr/tensor.hpp"

namespace sdr {

/// Architecture of the routed network: L blocks, each made of one shared
/// channel group (width c_s) and g individual groups (width c_i each). A
/// sub-net sees [shared | one individual group] per block; the full net sees
/// all groups. Heads are shared by every sub-net.
struct NetConfig {
    std::size_t input_dim = 0;
    std::size_t blocks = 0;           // L
    std::size_t groups = 0;           // g
    std::size_t shared_width = 0;     // c_s
    std::size_t individual_width = 0; // c_i
    std::size_t stem_dim = 0;         // 0 disables the input projection
    std::vector<std::size_t> proj_dims; // 2-layer projection head widths
    std::vector<std::size_t> pred_dims; // 2-layer prediction head widths (bottleneck)
    bool bn_affine = true;

    std::size_t path_count() const; // g^L
    std::size_t subnet_block_width() const { return shared_width + individual_width; }
    std::size_t full_block_width() const { return shared_width + groups * individual_width; }
    std::size_t block_input_width(std::size_t block) const;
    std::size_t backbone_dim(bool full) const {
        return full ? full_block_width() : subnet_block_width();
    }

    /// Structural sanity; enough for parameter accounting (heads optional).
    void validate_shape() const;
    /// Full validation for an instantiable training network.
    void validate() const;
};

/// One individual-group choice per block; identifies a sub-net and, through
/// the fixed dataset mapping, its training subset.
struct PathCode {
    std::vector<std::size_t> digits; // length L, each in [0, g)

    bool operator==(const PathCode&) const = default;
};

/// Base-g positional value of the digits, block 0 most significant.
std::size_t path_index(const PathCode& path, std::size_t groups);
PathCode path_decode(std::size_t index, std::size_t groups, std::size_t blocks);

/// Either the full network or one path. The unit every forward, calibration
/// and training step addresses.
class NetTarget {
public:
    static NetTarget full() { return NetTarget{}; }
    static NetTarget path(PathCode p) {
        NetTarget t;
        t.path_ = std::move(p);
        return t;
    }

    bool is_full() const { return !path_.has_value(); }
    const PathCode& path_code() const;

    /// Stable registry/serialization key: "full" or "path<index>".
    std::string key(std::size_t groups) const;

    bool operator==(const NetTarget&) const = default;

private:
    std::optional<PathCode> path_;
};

struct ParamSpec {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
};

/// Canonical full-network parameter list: stem, per-block shared/individual
/// weights and BN affines, then heads. Naming scheme:
///   stem.w|b, block{l}.shared.w|b, block{l}.ind{j}.w|b,
///   block{l}.bn.{shared|ind{j}}.scale|shift, proj.{0|1}.w|b, pred.{0|1}.w|b
std::vector<ParamSpec> param_specs(const NetConfig& config);
std::vector<std::string> subnet_param_names(const NetConfig& config, const PathCode& path);
std::size_t param_count(const NetConfig& config);
std::size_t param_count(const NetConfig& config, const PathCode& path);

/// Per-channel mean/variance of each block's pre-activation, recorded by
/// bn_calibrate for one target network.
struct BnBlockStats {
    std::vector<double> mean;
    std::vector<double> var;
};

/// Registry of calibrated statistics keyed by NetTarget::key. Concurrent
/// inserts for distinct targets are allowed. Moves transfer the entries and
/// require that no other thread is using the source.
class BnStats {
public:
    BnStats() = default;
    BnStats(BnStats&& other) noexcept;
    BnStats& operator=(BnStats&& other) noexcept;
    BnStats(const BnStats&) = delete;
    BnStats& operator=(const BnStats&) = delete;

    bool has(const std::string& key) const;
    const std::vector<BnBlockStats>& get(const std::string& key) const;
    void put(const std::string& key, std::vector<BnBlockStats> stats);
    std::vector<std::string> keys() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::vector<BnBlockStats>> entries_;
};

enum class RunMode { train, eval };

struct ForwardResult {
    Tensor2D backbone;   // last block activation (target's view width)
    Tensor2D projection; // z
    Tensor2D prediction; // p
};

/// Intermediate activations retained by a train-mode forward so backward can
/// replay it. Bound to the network version that produced it.
struct ForwardCache {
    struct Block {
        Tensor2D input; // activation entering the block
        Tensor2D pre;   // pre-BN
        std::vector<double> mean, var, inv_std;
        std::vector<char> floored;
        Tensor2D xhat;
        Tensor2D bn_out;
    };

    std::uint64_t net_version = 0;
    NetTarget target;
    RunMode mode = RunMode::train;
    Tensor2D input;
    std::vector<Block> blocks;
    Tensor2D backbone;
    Tensor2D head_in; // reduced view for the full net; == backbone for a path
    Tensor2D proj_pre, proj_hidden, z;
    Tensor2D pred_pre, pred_hidden, p;
};

/// The routed network. Weights of every sub-net are views into this one
/// parameter store; nothing is ever copied per path.
class SdrNet {
public:
    SdrNet(NetConfig config, Rng& rng); // fan-in scaled uniform init
    /// Zero-initialized; loaders fill parameters by name afterwards.
    explicit SdrNet(NetConfig config);

    const NetConfig& config() const { return config_; }

    const std::vector<Param>& params() const { return params_; }
    std::vector<Param>& params() { return params_; }
    Param& param(const std::string& name);
    const Param& param(const std::string& name) const;

    /// W_i: pointers into the parameter store, canonical order. The full
    /// target returns every parameter.
    std::vector<Param*> subnet_params(const NetTarget& target);
    std::vector<const Param*> subnet_params(const NetTarget& target) const;

    void zero_grad(const NetTarget& target);

    /// Any mutation of parameter values must bump the version so stale
    /// forward caches are rejected by backward().
    void mark_mutated() { ++version_; }
    std::uint64_t version() const { return version_; }

    /// Eval mode requires calibrated stats for `target` in `bn`. Train mode
    /// normalizes with batch statistics and needs batch size >= 2.
    ForwardResult forward(const NetTarget& target, const Tensor2D& batch, RunMode mode,
                          const BnStats* bn = nullptr, ForwardCache* cache = nullptr) const;

    /// Accumulates gradients of the target's parameters given upstream
    /// gradients on the projection (dz, direct consumers only) and the
    /// prediction (dp). Either may be empty.
    void backward(const ForwardCache& cache, const Tensor2D& dz, const Tensor2D& dp);

private:
    void bind(const NetTarget& target, std::vector<std::size_t>& out) const;

    NetConfig config_;
    std::vector<Param> params_;
    std::unordered_map<std::string, std::size_t> index_;
    std::uint64_t version_ = 0;
};

/// Train-statistics pass over `samples` in chunks of batch_size; per-channel
/// stats are averaged over chunks. A trailing chunk of one sample is merged
/// into its predecessor.
std::vector<BnBlockStats> bn_calibrate(const SdrNet& net, const NetTarget& target,
                                       const Tensor2D& samples, std::size_t batch_size);

/// Calibrates and registers under the target's key.
void bn_calibrate_into(BnStats& registry, const SdrNet& net, const NetTarget& target,
                       const Tensor2D& samples, std::size_t batch_size);

} // namespace sdr
