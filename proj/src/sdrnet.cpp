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
#include "sdr/sdrnet.hpp"

#include <algorithm>
#include <cmath>

namespace sdr {

namespace {

constexpr double kVarFloor = 1e-8;
constexpr std::size_t kMaxPaths = 65536;

Tensor2D linear(const Tensor2D& x, const Tensor2D& w, const Tensor2D& bias) {
    Tensor2D y = matmul(x, w);
    SDR_CHECK_SHAPE(bias.rows() == 1 && bias.cols() == y.cols(), "linear: bias shape mismatch");
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += bias(0, j);
    return y;
}

Tensor2D slice_cols(const Tensor2D& m, std::size_t lo, std::size_t n) {
    Tensor2D out(m.rows(), n);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = m(i, lo + j);
    return out;
}

Tensor2D concat_cols(const Tensor2D& a, const Tensor2D& b) {
    SDR_CHECK_SHAPE(a.rows() == b.rows(), "concat_cols: row mismatch");
    Tensor2D out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
    }
    return out;
}

Tensor2D col_sums(const Tensor2D& m) {
    Tensor2D out(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) += m(i, j);
    return out;
}

void copy_cols_into(Tensor2D& dst, std::size_t lo, const Tensor2D& src) {
    for (std::size_t i = 0; i < src.rows(); ++i)
        for (std::size_t j = 0; j < src.cols(); ++j) dst(i, lo + j) = src(i, j);
}

/// Mean of the g individual-group column stripes of a full-width activation.
Tensor2D mean_individual(const Tensor2D& act, const NetConfig& cfg) {
    const std::size_t c_s = cfg.shared_width, c_i = cfg.individual_width, g = cfg.groups;
    Tensor2D m(act.rows(), c_i);
    for (std::size_t i = 0; i < act.rows(); ++i)
        for (std::size_t j = 0; j < c_i; ++j) {
            double s = 0.0;
            for (std::size_t grp = 0; grp < g; ++grp) s += act(i, c_s + grp * c_i + j);
            m(i, j) = s / static_cast<double>(g);
        }
    return m;
}

} // namespace

std::size_t NetConfig::path_count() const {
    std::size_t n = 1;
    for (std::size_t l = 0; l < blocks; ++l) {
        SDR_CHECK(n <= kMaxPaths / std::max<std::size_t>(groups, 1),
                  "NetConfig: path count g^L is unreasonably large");
        n *= groups;
    }
    return n;
}

std::size_t NetConfig::block_input_width(std::size_t block) const {
    if (block == 0) return stem_dim > 0 ? stem_dim : input_dim;
    return subnet_block_width();
}

void NetConfig::validate_shape() const {
    SDR_CHECK(input_dim >= 1, "NetConfig: input_dim must be >= 1");
    SDR_CHECK(blocks >= 1, "NetConfig: need at least one block");
    SDR_CHECK(groups >= 1, "NetConfig: need at least one individual group");
    SDR_CHECK(individual_width >= 1, "NetConfig: individual_width must be >= 1");
    path_count(); // bounds check
    SDR_CHECK(proj_dims.size() == 0 || proj_dims.size() == 2,
              "NetConfig: proj_dims must have exactly two widths");
    SDR_CHECK(pred_dims.size() == 0 || pred_dims.size() == 2,
              "NetConfig: pred_dims must have exactly two widths");
    SDR_CHECK(proj_dims.empty() == pred_dims.empty(),
              "NetConfig: projection and prediction heads come together");
    if (!proj_dims.empty()) {
        SDR_CHECK(proj_dims[0] >= 1 && proj_dims[1] >= 1 && pred_dims[0] >= 1,
                  "NetConfig: head widths must be >= 1");
        SDR_CHECK(pred_dims[1] == proj_dims[1],
                  "NetConfig: prediction head must map back to the projection width");
    }
}

void NetConfig::validate() const {
    validate_shape();
    SDR_CHECK(!proj_dims.empty(), "NetConfig: a trainable network requires heads");
}

std::size_t path_index(const PathCode& path, std::size_t groups) {
    SDR_CHECK(groups >= 1, "path_index: groups must be >= 1");
    std::size_t idx = 0;
    for (std::size_t digit : path.digits) {
        if (digit >= groups)
            throw Error("path_index: digit " + std::to_string(digit) + " out of range [0," +
                        std::to_string(groups) + ")");
        idx = idx * groups + digit;
    }
    return idx;
}

PathCode path_decode(std::size_t index, std::size_t groups, std::size_t blocks) {
    SDR_CHECK(groups >= 1 && blocks >= 1, "path_decode: invalid groups/blocks");
    PathCode p;
    p.digits.assign(blocks, 0);
    std::size_t rem = index;
    for (std::size_t l = blocks; l-- > 0;) {
        p.digits[l] = rem % groups;
        rem /= groups;
    }
    if (rem != 0)
        throw Error("path_decode: index " + std::to_string(index) + " out of range for g^L");
    return p;
}

const PathCode& NetTarget::path_code() const {
    SDR_CHECK(path_.has_value(), "NetTarget: full target has no path code");
    return *path_;
}

std::string NetTarget::key(std::size_t groups) const {
    if (is_full()) return "full";
    return "path" + std::to_string(path_index(*path_, groups));
}

std::vector<ParamSpec> param_specs(const NetConfig& c) {
    c.validate_shape();
    std::vector<ParamSpec> out;
    if (c.stem_dim > 0) {
        out.push_back({"stem.w", c.input_dim, c.stem_dim});
        out.push_back({"stem.b", 1, c.stem_dim});
    }
    for (std::size_t l = 0; l < c.blocks; ++l) {
        const std::string prefix = "block" + std::to_string(l) + ".";
        const std::size_t in = c.block_input_width(l);
        out.push_back({prefix + "shared.w", in, c.shared_width});
        out.push_back({prefix + "shared.b", 1, c.shared_width});
        for (std::size_t j = 0; j < c.groups; ++j) {
            const std::string ind = prefix + "ind" + std::to_string(j);
            out.push_back({ind + ".w", in, c.individual_width});
            out.push_back({ind + ".b", 1, c.individual_width});
        }
        if (c.bn_affine) {
            out.push_back({prefix + "bn.shared.scale", 1, c.shared_width});
            out.push_back({prefix + "bn.shared.shift", 1, c.shared_width});
            for (std::size_t j = 0; j < c.groups; ++j) {
                const std::string ind = prefix + "bn.ind" + std::to_string(j);
                out.push_back({ind + ".scale", 1, c.individual_width});
                out.push_back({ind + ".shift", 1, c.individual_width});
            }
        }
    }
    if (!c.proj_dims.empty()) {
        out.push_back({"proj.0.w", c.subnet_block_width(), c.proj_dims[0]});
        out.push_back({"proj.0.b", 1, c.proj_dims[0]});
        out.push_back({"proj.1.w", c.proj_dims[0], c.proj_dims[1]});
        out.push_back({"proj.1.b", 1, c.proj_dims[1]});
        out.push_back({"pred.0.w", c.proj_dims[1], c.pred_dims[0]});
        out.push_back({"pred.0.b", 1, c.pred_dims[0]});
        out.push_back({"pred.1.w", c.pred_dims[0], c.pred_dims[1]});
        out.push_back({"pred.1.b", 1, c.pred_dims[1]});
    }
    return out;
}

std::vector<std::string> subnet_param_names(const NetConfig& c, const PathCode& path) {
    SDR_CHECK(path.digits.size() == c.blocks, "subnet_param_names: wrong path length");
    for (std::size_t d : path.digits)
        SDR_CHECK(d < c.groups, "subnet_param_names: path digit out of range");
    std::vector<std::string> out;
    if (c.stem_dim > 0) {
        out.push_back("stem.w");
        out.push_back("stem.b");
    }
    for (std::size_t l = 0; l < c.blocks; ++l) {
        const std::string prefix = "block" + std::to_string(l) + ".";
        const std::string ind = "ind" + std::to_string(path.digits[l]);
        out.push_back(prefix + "shared.w");
        out.push_back(prefix + "shared.b");
        out.push_back(prefix + ind + ".w");
        out.push_back(prefix + ind + ".b");
        if (c.bn_affine) {
            out.push_back(prefix + "bn.shared.scale");
            out.push_back(prefix + "bn.shared.shift");
            out.push_back(prefix + "bn." + ind + ".scale");
            out.push_back(prefix + "bn." + ind + ".shift");
        }
    }
    if (!c.proj_dims.empty()) {
        for (const char* n : {"proj.0.w", "proj.0.b", "proj.1.w", "proj.1.b", "pred.0.w",
                              "pred.0.b", "pred.1.w", "pred.1.b"})
            out.push_back(n);
    }
    return out;
}

std::size_t param_count(const NetConfig& c) {
    std::size_t n = 0;
    for (const auto& s : param_specs(c)) n += s.size();
    return n;
}

std::size_t param_count(const NetConfig& c, const PathCode& path) {
    std::map<std::string, std::size_t> sizes;
    for (const auto& s : param_specs(c)) sizes[s.name] = s.size();
    std::size_t n = 0;
    for (const auto& name : subnet_param_names(c, path)) n += sizes.at(name);
    return n;
}

BnStats::BnStats(BnStats&& other) noexcept {
    std::lock_guard<std::mutex> lock(other.mutex_);
    entries_ = std::move(other.entries_);
}

BnStats& BnStats::operator=(BnStats&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        entries_ = std::move(other.entries_);
    }
    return *this;
}

bool BnStats::has(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.count(key) > 0;
}

const std::vector<BnBlockStats>& BnStats::get(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end())
        throw CalibrationError("BnStats: no calibrated statistics for '" + key +
                               "'; run bn_calibrate on the target's training subset first");
    return it->second;
}

void BnStats::put(const std::string& key, std::vector<BnBlockStats> stats) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_[key] = std::move(stats);
}

std::vector<std::string> BnStats::keys() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

SdrNet::SdrNet(NetConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto specs = param_specs(config_);
    params_.reserve(specs.size());
    for (const auto& s : specs) {
        index_[s.name] = params_.size();
        params_.emplace_back(s.name, Tensor2D(s.rows, s.cols));
    }
}

SdrNet::SdrNet(NetConfig config, Rng& rng) : SdrNet(std::move(config)) {
    // fan-in scaled uniform for weights, zeros for biases, identity affine;
    // filled in canonical order so a seed fixes every value
    for (auto& p : params_) {
        const auto& name = p.name;
        if (name.ends_with(".w")) {
            const double bound = std::sqrt(6.0 / static_cast<double>(p.value.rows()));
            for (double& v : p.value.data()) v = rng.uniform(-bound, bound);
        } else if (name.ends_with(".scale")) {
            p.value.fill(1.0);
        }
        // biases and shifts stay zero
    }
}

Param& SdrNet::param(const std::string& name) {
    auto it = index_.find(name);
    SDR_CHECK(it != index_.end(), "SdrNet: unknown parameter '" + name + "'");
    return params_[it->second];
}

const Param& SdrNet::param(const std::string& name) const {
    auto it = index_.find(name);
    SDR_CHECK(it != index_.end(), "SdrNet: unknown parameter '" + name + "'");
    return params_[it->second];
}

void SdrNet::bind(const NetTarget& target, std::vector<std::size_t>& out) const {
    if (target.is_full()) {
        out.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) out[i] = i;
        return;
    }
    for (const auto& name : subnet_param_names(config_, target.path_code()))
        out.push_back(index_.at(name));
}

std::vector<Param*> SdrNet::subnet_params(const NetTarget& target) {
    std::vector<std::size_t> idx;
    bind(target, idx);
    std::vector<Param*> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(&params_[i]);
    return out;
}

std::vector<const Param*> SdrNet::subnet_params(const NetTarget& target) const {
    std::vector<std::size_t> idx;
    bind(target, idx);
    std::vector<const Param*> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(&params_[i]);
    return out;
}

void SdrNet::zero_grad(const NetTarget& target) {
    for (Param* p : subnet_params(target)) p->zero_grad();
}

ForwardResult SdrNet::forward(const NetTarget& target, const Tensor2D& batch, RunMode mode,
                              const BnStats* bn, ForwardCache* cache) const {
    SDR_CHECK_SHAPE(batch.cols() == config_.input_dim, "forward: batch width != input_dim");
    SDR_CHECK(batch.rows() >= 1, "forward: empty batch");
    if (mode == RunMode::train)
        SDR_CHECK(batch.rows() >= 2,
                  "forward: train mode requires batch size >= 2 (BN variance undefined)");

    const bool full = target.is_full();
    if (!full) {
        const auto& d = target.path_code().digits;
        SDR_CHECK(d.size() == config_.blocks, "forward: invalid path length");
        for (std::size_t v : d) SDR_CHECK(v < config_.groups, "forward: invalid path digit");
    }

    const std::vector<BnBlockStats>* stored = nullptr;
    if (mode == RunMode::eval) {
        if (bn == nullptr)
            throw CalibrationError("forward: eval mode requires a BnStats registry");
        stored = &bn->get(target.key(config_.groups)); // throws if absent
        SDR_CHECK_SHAPE(stored->size() == config_.blocks,
                        "forward: calibrated stats block count mismatch");
    }

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c = ForwardCache{};
    c.net_version = version_;
    c.target = target;
    c.mode = mode;
    c.input = batch;
    c.blocks.resize(config_.blocks);

    const std::size_t c_s = config_.shared_width, c_i = config_.individual_width;
    const std::size_t g = config_.groups;

    Tensor2D act = batch;
    if (config_.stem_dim > 0)
        act = linear(act, param("stem.w").value, param("stem.b").value);

    for (std::size_t l = 0; l < config_.blocks; ++l) {
        auto& bc = c.blocks[l];
        bc.input = act;
        const std::string prefix = "block" + std::to_string(l) + ".";
        const std::size_t width = full ? config_.full_block_width() : config_.subnet_block_width();
        const std::size_t b = act.rows();

        Tensor2D pre(b, width);

        // group inputs: a sub-net feeds the previous activation to both its
        // groups; the full net feeds each group [shared | own stripe] and the
        // shared group [shared | stripe mean]
        if (!full) {
            const std::size_t j = target.path_code().digits[l];
            copy_cols_into(pre, 0,
                           linear(act, param(prefix + "shared.w").value,
                                  param(prefix + "shared.b").value));
            const std::string ind = prefix + "ind" + std::to_string(j);
            copy_cols_into(pre, c_s, linear(act, param(ind + ".w").value,
                                            param(ind + ".b").value));
        } else if (l == 0) {
            copy_cols_into(pre, 0,
                           linear(act, param(prefix + "shared.w").value,
                                  param(prefix + "shared.b").value));
            for (std::size_t j = 0; j < g; ++j) {
                const std::string ind = prefix + "ind" + std::to_string(j);
                copy_cols_into(pre, c_s + j * c_i,
                               linear(act, param(ind + ".w").value, param(ind + ".b").value));
            }
        } else {
            const Tensor2D sh = slice_cols(act, 0, c_s);
            const Tensor2D m = mean_individual(act, config_);
            copy_cols_into(pre, 0,
                           linear(concat_cols(sh, m), param(prefix + "shared.w").value,
                                  param(prefix + "shared.b").value));
            for (std::size_t j = 0; j < g; ++j) {
                const std::string ind = prefix + "ind" + std::to_string(j);
                const Tensor2D stripe = slice_cols(act, c_s + j * c_i, c_i);
                copy_cols_into(pre, c_s + j * c_i,
                               linear(concat_cols(sh, stripe), param(ind + ".w").value,
                                      param(ind + ".b").value));
            }
        }

        // per-channel affine parameters, laid out to match the channel order
        std::vector<double> gamma(width, 1.0), beta(width, 0.0);
        if (config_.bn_affine) {
            const auto& ss = param(prefix + "bn.shared.scale").value;
            const auto& sf = param(prefix + "bn.shared.shift").value;
            for (std::size_t ch = 0; ch < c_s; ++ch) {
                gamma[ch] = ss(0, ch);
                beta[ch] = sf(0, ch);
            }
            auto fill_group = [&](std::size_t j, std::size_t lo) {
                const std::string ind = prefix + "bn.ind" + std::to_string(j);
                const auto& gs = param(ind + ".scale").value;
                const auto& gf = param(ind + ".shift").value;
                for (std::size_t ch = 0; ch < c_i; ++ch) {
                    gamma[lo + ch] = gs(0, ch);
                    beta[lo + ch] = gf(0, ch);
                }
            };
            if (full)
                for (std::size_t j = 0; j < g; ++j) fill_group(j, c_s + j * c_i);
            else
                fill_group(target.path_code().digits[l], c_s);
        }

        bc.pre = pre;
        bc.mean.assign(width, 0.0);
        bc.var.assign(width, 0.0);
        bc.inv_std.assign(width, 0.0);
        bc.floored.assign(width, 0);
        bc.xhat = Tensor2D(b, width);
        bc.bn_out = Tensor2D(b, width);

        for (std::size_t ch = 0; ch < width; ++ch) {
            double mean, var;
            if (mode == RunMode::train) {
                double s = 0.0;
                for (std::size_t i = 0; i < b; ++i) s += pre(i, ch);
                mean = s / static_cast<double>(b);
                double v = 0.0;
                for (std::size_t i = 0; i < b; ++i) {
                    const double d = pre(i, ch) - mean;
                    v += d * d;
                }
                var = v / static_cast<double>(b);
            } else {
                SDR_CHECK_SHAPE((*stored)[l].mean.size() == width,
                                "forward: calibrated stats width mismatch");
                mean = (*stored)[l].mean[ch];
                var = (*stored)[l].var[ch];
            }
            bc.mean[ch] = mean;
            bc.var[ch] = var;
            const bool floored = var < kVarFloor;
            bc.floored[ch] = floored ? 1 : 0;
            const double inv_std = 1.0 / std::sqrt(floored ? kVarFloor : var);
            bc.inv_std[ch] = inv_std;
            for (std::size_t i = 0; i < b; ++i) {
                const double xh = (pre(i, ch) - mean) * inv_std;
                bc.xhat(i, ch) = xh;
                bc.bn_out(i, ch) = gamma[ch] * xh + beta[ch];
            }
        }

        act = bc.bn_out;
        for (double& v : act.data()) v = v > 0.0 ? v : 0.0;
    }

    c.backbone = act;
    // heads consume the sub-net-width view; for the full net that is
    // [shared | stripe mean], which at g=1 equals the activation bit for bit
    c.head_in = full ? concat_cols(slice_cols(act, 0, c_s), mean_individual(act, config_))
                     : act;

    c.proj_pre = linear(c.head_in, param("proj.0.w").value, param("proj.0.b").value);
    c.proj_hidden = c.proj_pre;
    for (double& v : c.proj_hidden.data()) v = v > 0.0 ? v : 0.0;
    c.z = linear(c.proj_hidden, param("proj.1.w").value, param("proj.1.b").value);

    c.pred_pre = linear(c.z, param("pred.0.w").value, param("pred.0.b").value);
    c.pred_hidden = c.pred_pre;
    for (double& v : c.pred_hidden.data()) v = v > 0.0 ? v : 0.0;
    c.p = linear(c.pred_hidden, param("pred.1.w").value, param("pred.1.b").value);

    return ForwardResult{c.backbone, c.z, c.p};
}

void SdrNet::backward(const ForwardCache& cache, const Tensor2D& dz, const Tensor2D& dp) {
    if (cache.net_version != version_)
        throw StaleCacheError("backward: cache is stale; parameters changed since forward");
    SDR_CHECK(cache.mode == RunMode::train, "backward: requires a train-mode cache");

    const NetTarget& target = cache.target;
    const bool full = target.is_full();
    const std::size_t b = cache.input.rows();
    const std::size_t c_s = config_.shared_width, c_i = config_.individual_width;
    const std::size_t g = config_.groups;

    Tensor2D dp_eff = dp.empty() ? Tensor2D(b, config_.pred_dims[1]) : dp;
    Tensor2D dz_direct = dz.empty() ? Tensor2D(b, config_.proj_dims[1]) : dz;
    SDR_CHECK_SHAPE(dp_eff.rows() == b && dp_eff.cols() == config_.pred_dims[1],
                    "backward: dp shape mismatch");
    SDR_CHECK_SHAPE(dz_direct.rows() == b && dz_direct.cols() == config_.proj_dims[1],
                    "backward: dz shape mismatch");

    // prediction head
    add_inplace(param("pred.1.w").grad, matmul_atb(cache.pred_hidden, dp_eff));
    add_inplace(param("pred.1.b").grad, col_sums(dp_eff));
    Tensor2D d_pred_hidden = matmul_abt(dp_eff, param("pred.1.w").value);
    for (std::size_t i = 0; i < d_pred_hidden.size(); ++i)
        if (cache.pred_pre.data()[i] <= 0.0) d_pred_hidden.data()[i] = 0.0;
    add_inplace(param("pred.0.w").grad, matmul_atb(cache.z, d_pred_hidden));
    add_inplace(param("pred.0.b").grad, col_sums(d_pred_hidden));

    // total gradient on z: direct consumers plus the prediction path
    Tensor2D dz_total = matmul_abt(d_pred_hidden, param("pred.0.w").value);
    add_inplace(dz_total, dz_direct);

    // projection head
    add_inplace(param("proj.1.w").grad, matmul_atb(cache.proj_hidden, dz_total));
    add_inplace(param("proj.1.b").grad, col_sums(dz_total));
    Tensor2D d_proj_hidden = matmul_abt(dz_total, param("proj.1.w").value);
    for (std::size_t i = 0; i < d_proj_hidden.size(); ++i)
        if (cache.proj_pre.data()[i] <= 0.0) d_proj_hidden.data()[i] = 0.0;
    add_inplace(param("proj.0.w").grad, matmul_atb(cache.head_in, d_proj_hidden));
    add_inplace(param("proj.0.b").grad, col_sums(d_proj_hidden));
    Tensor2D d_head_in = matmul_abt(d_proj_hidden, param("proj.0.w").value);

    // head-in view -> gradient on the last block activation
    Tensor2D d_act;
    if (!full) {
        d_act = d_head_in;
    } else {
        d_act = Tensor2D(b, config_.full_block_width());
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t ch = 0; ch < c_s; ++ch) d_act(i, ch) += d_head_in(i, ch);
            for (std::size_t j = 0; j < g; ++j)
                for (std::size_t ch = 0; ch < c_i; ++ch)
                    d_act(i, c_s + j * c_i + ch) +=
                        d_head_in(i, c_s + ch) / static_cast<double>(g);
        }
    }

    for (std::size_t l = config_.blocks; l-- > 0;) {
        const auto& bc = cache.blocks[l];
        const std::string prefix = "block" + std::to_string(l) + ".";
        const std::size_t width = d_act.cols();

        // relu
        Tensor2D d_bn = d_act;
        for (std::size_t i = 0; i < d_bn.size(); ++i)
            if (bc.bn_out.data()[i] <= 0.0) d_bn.data()[i] = 0.0;

        // affine gamma per channel (mirrors forward layout)
        std::vector<double> gamma(width, 1.0);
        std::vector<Param*> scale_owner(width, nullptr);
        std::vector<Param*> shift_owner(width, nullptr);
        std::vector<std::size_t> owner_off(width, 0);
        if (config_.bn_affine) {
            Param& ss = param(prefix + "bn.shared.scale");
            Param& sf = param(prefix + "bn.shared.shift");
            for (std::size_t ch = 0; ch < c_s; ++ch) {
                gamma[ch] = ss.value(0, ch);
                scale_owner[ch] = &ss;
                shift_owner[ch] = &sf;
                owner_off[ch] = ch;
            }
            auto bindg = [&](std::size_t j, std::size_t lo) {
                Param& gs = param(prefix + "bn.ind" + std::to_string(j) + ".scale");
                Param& gf = param(prefix + "bn.ind" + std::to_string(j) + ".shift");
                for (std::size_t ch = 0; ch < c_i; ++ch) {
                    gamma[lo + ch] = gs.value(0, ch);
                    scale_owner[lo + ch] = &gs;
                    shift_owner[lo + ch] = &gf;
                    owner_off[lo + ch] = ch;
                }
            };
            if (full)
                for (std::size_t j = 0; j < g; ++j) bindg(j, c_s + j * c_i);
            else
                bindg(target.path_code().digits[l], c_s);
        }

        // batch-norm backward, channel-wise
        Tensor2D d_pre(b, width);
        for (std::size_t ch = 0; ch < width; ++ch) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < b; ++i) {
                s1 += d_bn(i, ch);
                s2 += d_bn(i, ch) * bc.xhat(i, ch);
            }
            if (config_.bn_affine) {
                scale_owner[ch]->grad(0, owner_off[ch]) += s2;
                shift_owner[ch]->grad(0, owner_off[ch]) += s1;
            }
            const double gs = gamma[ch] * bc.inv_std[ch];
            const double inv_b = 1.0 / static_cast<double>(b);
            if (bc.floored[ch]) {
                for (std::size_t i = 0; i < b; ++i)
                    d_pre(i, ch) = gs * (d_bn(i, ch) - s1 * inv_b);
            } else {
                for (std::size_t i = 0; i < b; ++i)
                    d_pre(i, ch) =
                        gs * (d_bn(i, ch) - s1 * inv_b - bc.xhat(i, ch) * s2 * inv_b);
            }
        }

        // linear group weights and gradient on the block input
        const Tensor2D d_pre_s = slice_cols(d_pre, 0, c_s);
        Tensor2D d_input;
        if (!full) {
            const std::size_t j = target.path_code().digits[l];
            const std::string ind = prefix + "ind" + std::to_string(j);
            const Tensor2D d_pre_j = slice_cols(d_pre, c_s, c_i);
            add_inplace(param(prefix + "shared.w").grad, matmul_atb(bc.input, d_pre_s));
            add_inplace(param(prefix + "shared.b").grad, col_sums(d_pre_s));
            add_inplace(param(ind + ".w").grad, matmul_atb(bc.input, d_pre_j));
            add_inplace(param(ind + ".b").grad, col_sums(d_pre_j));
            d_input = matmul_abt(d_pre_s, param(prefix + "shared.w").value);
            add_inplace(d_input, matmul_abt(d_pre_j, param(ind + ".w").value));
        } else if (l == 0) {
            add_inplace(param(prefix + "shared.w").grad, matmul_atb(bc.input, d_pre_s));
            add_inplace(param(prefix + "shared.b").grad, col_sums(d_pre_s));
            d_input = matmul_abt(d_pre_s, param(prefix + "shared.w").value);
            for (std::size_t j = 0; j < g; ++j) {
                const std::string ind = prefix + "ind" + std::to_string(j);
                const Tensor2D d_pre_j = slice_cols(d_pre, c_s + j * c_i, c_i);
                add_inplace(param(ind + ".w").grad, matmul_atb(bc.input, d_pre_j));
                add_inplace(param(ind + ".b").grad, col_sums(d_pre_j));
                add_inplace(d_input, matmul_abt(d_pre_j, param(ind + ".w").value));
            }
        } else {
            const Tensor2D sh = slice_cols(bc.input, 0, c_s);
            const Tensor2D m = mean_individual(bc.input, config_);
            const Tensor2D in_s = concat_cols(sh, m);
            add_inplace(param(prefix + "shared.w").grad, matmul_atb(in_s, d_pre_s));
            add_inplace(param(prefix + "shared.b").grad, col_sums(d_pre_s));
            const Tensor2D d_in_s = matmul_abt(d_pre_s, param(prefix + "shared.w").value);

            d_input = Tensor2D(b, config_.full_block_width());
            // shared stripe takes the shared halves; the mean distributes
            // 1/g of the individual half to every stripe
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t ch = 0; ch < c_s; ++ch) d_input(i, ch) += d_in_s(i, ch);
                for (std::size_t j = 0; j < g; ++j)
                    for (std::size_t ch = 0; ch < c_i; ++ch)
                        d_input(i, c_s + j * c_i + ch) +=
                            d_in_s(i, c_s + ch) / static_cast<double>(g);
            }
            for (std::size_t j = 0; j < g; ++j) {
                const std::string ind = prefix + "ind" + std::to_string(j);
                const Tensor2D stripe = slice_cols(bc.input, c_s + j * c_i, c_i);
                const Tensor2D in_j = concat_cols(sh, stripe);
                const Tensor2D d_pre_j = slice_cols(d_pre, c_s + j * c_i, c_i);
                add_inplace(param(ind + ".w").grad, matmul_atb(in_j, d_pre_j));
                add_inplace(param(ind + ".b").grad, col_sums(d_pre_j));
                const Tensor2D d_in_j = matmul_abt(d_pre_j, param(ind + ".w").value);
                for (std::size_t i = 0; i < b; ++i) {
                    for (std::size_t ch = 0; ch < c_s; ++ch) d_input(i, ch) += d_in_j(i, ch);
                    for (std::size_t ch = 0; ch < c_i; ++ch)
                        d_input(i, c_s + j * c_i + ch) += d_in_j(i, c_s + ch);
                }
            }
        }
        d_act = std::move(d_input);
    }

    if (config_.stem_dim > 0) {
        add_inplace(param("stem.w").grad, matmul_atb(cache.input, d_act));
        add_inplace(param("stem.b").grad, col_sums(d_act));
    }
}

std::vector<BnBlockStats> bn_calibrate(const SdrNet& net, const NetTarget& target,
                                       const Tensor2D& samples, std::size_t batch_size) {
    SDR_CHECK(samples.rows() >= 1, "bn_calibrate: empty dataset");
    SDR_CHECK(samples.rows() >= 2, "bn_calibrate: needs at least two samples for statistics");
    const std::size_t n = samples.rows();
    const std::size_t bs = std::max<std::size_t>(2, std::min(batch_size, n));

    // deal rows across chunks in a stride pattern: datasets often arrive
    // grouped, and a contiguous chunk of one group would understate the
    // between-group variance in the averaged statistics
    const std::size_t chunk_count = (n + bs - 1) / bs;
    std::vector<std::vector<std::size_t>> chunks(chunk_count);
    for (std::size_t i = 0; i < n; ++i) chunks[i % chunk_count].push_back(i);
    if (chunks.size() >= 2 && chunks.back().size() < 2) {
        chunks[chunks.size() - 2].push_back(chunks.back()[0]);
        chunks.pop_back();
    }

    const std::size_t blocks = net.config().blocks;
    std::vector<BnBlockStats> acc(blocks);
    for (std::size_t l = 0; l < blocks; ++l) {
        const std::size_t width = net.config().backbone_dim(target.is_full());
        acc[l].mean.assign(width, 0.0);
        acc[l].var.assign(width, 0.0);
    }

    for (const auto& rows : chunks) {
        Tensor2D chunk(rows.size(), samples.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto src = samples.row(rows[i]);
            std::copy(src.begin(), src.end(), chunk.row(i).begin());
        }
        ForwardCache cache;
        net.forward(target, chunk, RunMode::train, nullptr, &cache);
        for (std::size_t l = 0; l < blocks; ++l) {
            for (std::size_t ch = 0; ch < acc[l].mean.size(); ++ch) {
                acc[l].mean[ch] += cache.blocks[l].mean[ch];
                acc[l].var[ch] += cache.blocks[l].var[ch];
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(chunks.size());
    for (auto& s : acc) {
        for (double& v : s.mean) v *= inv;
        for (double& v : s.var) v *= inv;
    }
    return acc;
}

void bn_calibrate_into(BnStats& registry, const SdrNet& net, const NetTarget& target,
                       const Tensor2D& samples, std::size_t batch_size) {
    registry.put(target.key(net.config().groups),
                 bn_calibrate(net, target, samples, batch_size));
}

} // namespace sdr
