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
#include "sdr/config.hpp"

#include <cmath>
#include <set>

#include "sdr/checkpoint.hpp"
#include "sdr/text.hpp"

namespace sdr {

namespace {

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> defaults = {
        {"seed", "42"},

        {"data.dim", "32"},
        {"data.superclusters", "4"},
        {"data.subclusters", "1"},
        {"data.samples_per_subcluster", "500"},
        {"data.separation", "6.0"},
        {"data.noise", "1.0"},
        {"data.normalize", "false"},

        {"net.g", "2"},
        {"net.L", "2"},
        {"net.shared_width", "16"},
        {"net.individual_width", "16"},
        {"net.stem_dim", "0"},
        {"net.proj_hidden", "32"},
        {"net.proj_out", "32"},
        {"net.pred_hidden", "16"},

        {"cluster.k", "4"},
        {"cluster.epsilon", "0.05"},
        {"cluster.sinkhorn_iters", "200"},
        {"cluster.sinkhorn_tol", "1e-6"},
        {"cluster.epochs", "30"},
        {"cluster.lr", "0.002"},
        {"cluster.momentum", "0.9"},
        {"cluster.temperature", "0.1"},

        {"train.batch", "64"},
        {"train.lr", "0.05"},
        {"train.momentum", "0.9"},
        {"train.weight_decay", "0.0001"},
        {"train.lambda_kd", "1.0"},
        {"train.distill", "siamkd"},
        {"train.total_steps", "3000"},
        {"train.phase0_frac", "0.3"},
        {"train.cosine_decay", "false"},
        {"base.total_steps", "1500"},

        {"augment.noise_sigma", "0.3"},
        {"augment.mask_prob", "0.1"},
        {"augment.scale_jitter", "0.2"},

        {"knn.k", "200"},
        {"knn.weighted", "false"},
        {"route.threads", "0"},
        {"route.bn_batch", "64"},

        {"task.classes", "4"},
        {"task.train_per_class", "100"},
        {"task.eval_per_class", "25"},
        {"task.offset", "1.5"},
        {"task.noise", "0.5"},
    };
    return defaults;
}

} // namespace

Config Config::defaults() {
    Config c;
    c.values_ = default_values();
    return c;
}

Config Config::from_string(const std::string& text) {
    Config c = defaults();
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError("config line " + std::to_string(line_no) +
                             ": expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty() || value.empty())
            throw ParseError("config line " + std::to_string(line_no) + ": empty key or value");
        c.set(key, value);
    }
    return c;
}

Config Config::load(const std::string& path) { return from_string(read_file(path)); }

void Config::set(const std::string& key, const std::string& value) {
    if (default_values().count(key) == 0)
        throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
}

std::string Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

double Config::get_f64(const std::string& key) const {
    const auto v = parse_double(get_str(key));
    if (!v) throw ConfigError("config key '" + key + "' is not a finite number");
    return *v;
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const auto v = parse_u64(get_str(key));
    if (!v) throw ConfigError("config key '" + key + "' is not a nonnegative integer");
    return *v;
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "' must be true or false");
}

std::string Config::snapshot() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

void Config::validate() const {
    const auto g = get_u64("net.g");
    const auto l = get_u64("net.L");
    std::size_t paths = 1;
    for (std::size_t i = 0; i < l; ++i) paths *= g;
    const auto k = get_u64("cluster.k");
    if (k != paths)
        throw ConfigError("cluster.k=" + format_u64(k) + " must equal net.g^net.L=" +
                          format_u64(paths) + " (g=" + format_u64(g) + ", L=" + format_u64(l) +
                          ")");
    net_config().validate();
    cluster_config();
    train_config().validate(l);
    synthetic_spec().validate();
}

NetConfig Config::net_config() const {
    NetConfig c;
    c.input_dim = get_u64("data.dim");
    c.blocks = get_u64("net.L");
    c.groups = get_u64("net.g");
    c.shared_width = get_u64("net.shared_width");
    c.individual_width = get_u64("net.individual_width");
    c.stem_dim = get_u64("net.stem_dim");
    c.proj_dims = {get_u64("net.proj_hidden"), get_u64("net.proj_out")};
    c.pred_dims = {get_u64("net.pred_hidden"), get_u64("net.proj_out")};
    return c;
}

NetConfig Config::base_net_config() const {
    NetConfig c = net_config();
    c.groups = 1;
    return c;
}

ClusterConfig Config::cluster_config() const {
    ClusterConfig c;
    c.epsilon = get_f64("cluster.epsilon");
    c.sinkhorn_iters = get_u64("cluster.sinkhorn_iters");
    c.sinkhorn_tol = get_f64("cluster.sinkhorn_tol");
    c.centroid_lr = get_f64("cluster.lr");
    c.centroid_momentum = get_f64("cluster.momentum");
    c.temperature = get_f64("cluster.temperature");
    return c;
}

TrainConfig Config::train_config() const {
    TrainConfig c;
    c.sgd = {.learning_rate = get_f64("train.lr"),
             .momentum = get_f64("train.momentum"),
             .weight_decay = get_f64("train.weight_decay")};
    c.augment = {.gaussian_noise_sigma = get_f64("augment.noise_sigma"),
                 .mask_prob = get_f64("augment.mask_prob"),
                 .scale_jitter = get_f64("augment.scale_jitter")};
    c.batch_size = get_u64("train.batch");
    c.lambda_kd = get_f64("train.lambda_kd");
    const std::string mode = get_str("train.distill");
    if (mode == "siamkd")
        c.distill = DistillMode::siamkd;
    else if (mode == "l2")
        c.distill = DistillMode::l2;
    else
        throw ConfigError("train.distill must be 'siamkd' or 'l2'");
    c.cosine_decay = get_bool("train.cosine_decay");

    // phase budget: phase0_frac of the total first, the rest split evenly
    const std::size_t blocks = get_u64("net.L");
    const std::size_t total = get_u64("train.total_steps");
    const double frac = get_f64("train.phase0_frac");
    SDR_CHECK(frac >= 0.0 && frac <= 1.0, "train.phase0_frac must be in [0,1]");
    c.steps_per_phase.assign(blocks + 1, 0);
    const auto phase0 = static_cast<std::size_t>(std::llround(frac * (double)total));
    c.steps_per_phase[0] = phase0;
    if (blocks > 0) {
        const std::size_t rest = total - phase0;
        for (std::size_t p = 1; p <= blocks; ++p) c.steps_per_phase[p] = rest / blocks;
        c.steps_per_phase[blocks] += rest % blocks;
    }
    return c;
}

TrainConfig Config::base_train_config() const {
    TrainConfig c = train_config();
    c.lambda_kd = 0.0; // plain consistency training on the whole dataset
    c.steps_per_phase.assign(get_u64("net.L") + 1, 0);
    c.steps_per_phase[0] = get_u64("base.total_steps");
    return c;
}

RoutingConfig Config::routing_config() const {
    RoutingConfig c;
    c.knn_k = get_u64("knn.k");
    c.weighted_vote = get_bool("knn.weighted");
    c.threads = get_u64("route.threads");
    c.bn_batch = get_u64("route.bn_batch");
    return c;
}

SyntheticSpec Config::synthetic_spec() const {
    SyntheticSpec s;
    s.superclusters = get_u64("data.superclusters");
    s.subclusters = get_u64("data.subclusters");
    s.samples_per_subcluster = get_u64("data.samples_per_subcluster");
    s.dim = get_u64("data.dim");
    s.separation = get_f64("data.separation");
    s.noise = get_f64("data.noise");
    s.normalize = get_bool("data.normalize");
    s.seed = seed();
    return s;
}

TaskSpec Config::task_spec(std::size_t supercluster, std::uint64_t seed_offset) const {
    TaskSpec t;
    t.supercluster = supercluster;
    t.classes = get_u64("task.classes");
    t.train_per_class = get_u64("task.train_per_class");
    t.eval_per_class = get_u64("task.eval_per_class");
    t.offset = get_f64("task.offset");
    t.noise = get_f64("task.noise");
    // distinct stream per task, still pinned by the run seed
    t.seed = seed() * 1000003ull + 7919ull * (supercluster + 1) + seed_offset;
    return t;
}

} // namespace sdr
