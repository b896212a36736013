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

#include "sdr/routing.hpp"

namespace sdr {

/// Inverse of render_route_report.
RouteReport parse_route_report(const std::string& text);

struct MetricsSummary {
    struct Phase {
        std::size_t phase = 0;
        std::size_t steps = 0;
        double mean_loss = 0.0;
        double mean_kd = 0.0;
        double mean_collapse = 0.0;
    };
    std::vector<Phase> phases;
};

/// Aggregates a metrics log (one record per line) by phase.
MetricsSummary summarize_metrics(const std::string& log_text);

/// Plain-text accuracy tables: per route report a path table with mean/std,
/// a text histogram of per-path gains against the full-net reference entry,
/// a std-dev comparison when two reports are given (distillation ablation),
/// and an optional per-phase training summary.
std::string render_report(const std::vector<RouteReport>& routes,
                          const std::vector<std::string>& route_names,
                          const MetricsSummary* metrics);

/// Two gnuplot-friendly columns: path index and gain vs the full net.
std::string render_gains_columns(const RouteReport& report);

} // namespace sdr
