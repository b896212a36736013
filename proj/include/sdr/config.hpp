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
#include <string>

#include "sdr/clustering.hpp"
#include "sdr/routing.hpp"
#include "sdr/sdrnet.hpp"
#include "sdr/ssl.hpp"
#include "sdr/synthetic.hpp"

namespace sdr {

/// `key = value` lines with '#' comments and dotted section prefixes
/// (`net.g = 4`). Unknown keys are rejected; every tunable has a default.
/// The same map snapshots into checkpoint metadata, so a config plus a seed
/// pins a whole run.
class Config {
public:
    static Config defaults();
    static Config from_string(const std::string& text);
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_str(const std::string& key) const;
    double get_f64(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    /// Sorted `key=value` lines.
    std::string snapshot() const;

    /// Cross-field checks; notably cluster.k must equal net.g^net.L.
    void validate() const;

    std::uint64_t seed() const { return get_u64("seed"); }

    NetConfig net_config() const;
    NetConfig base_net_config() const; // g = 1 twin used by pretrain-base
    ClusterConfig cluster_config() const;
    std::size_t cluster_k() const { return get_u64("cluster.k"); }
    std::size_t cluster_epochs() const { return get_u64("cluster.epochs"); }
    TrainConfig train_config() const;      // phase budget split over L+1 phases
    TrainConfig base_train_config() const; // single-phase pure consistency run
    RoutingConfig routing_config() const;
    SyntheticSpec synthetic_spec() const;
    TaskSpec task_spec(std::size_t supercluster, std::uint64_t seed_offset) const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace sdr
