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
#include "sdr/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sdr/text.hpp"

namespace sdr {

namespace {

std::map<std::string, std::string> parse_kv_line(std::string_view line) {
    std::map<std::string, std::string> out;
    for (const auto& field : split(line, ' ')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        out[field.substr(0, eq)] = field.substr(eq + 1);
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

} // namespace

RouteReport parse_route_report(const std::string& text) {
    RouteReport r;
    std::vector<std::pair<std::size_t, double>> entries;
    for (const auto& raw : split(text, '\n')) {
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (line.rfind("task=", 0) == 0) {
            r.task_name = std::string(line.substr(5));
        } else if (line.rfind("k=", 0) == 0) {
            r.knn_k = *parse_u64(line.substr(2));
        } else if (line.rfind("seed=", 0) == 0) {
            r.seed = *parse_u64(line.substr(5));
        } else if (line.rfind("tiebreak=", 0) == 0) {
            const auto note = std::string(line.substr(9));
            r.tie_note = note == "none" ? "" : note;
        } else if (line.rfind("path=full", 0) == 0) {
            auto kv = parse_kv_line(line);
            r.full_accuracy = *parse_double(kv.at("acc"));
        } else if (line.rfind("path=", 0) == 0) {
            auto kv = parse_kv_line(line);
            const auto idx = parse_u64(kv.at("path"));
            if (!idx) throw ParseError("route report: bad path index line");
            entries.emplace_back(*idx, *parse_double(kv.at("acc")));
            if (r.blocks == 0) r.blocks = kv.at("digits").size();
        } else if (line.rfind("best=", 0) == 0) {
            auto kv = parse_kv_line(line);
            r.best_accuracy = *parse_double(kv.at("acc"));
            if (kv.at("best") == "full") {
                r.best_is_full = true;
            } else {
                r.best_path = *parse_u64(kv.at("best"));
            }
        }
    }
    std::sort(entries.begin(), entries.end());
    for (const auto& [idx, acc] : entries) {
        if (idx != r.path_accuracy.size())
            throw ParseError("route report: path indices are not contiguous");
        r.path_accuracy.push_back(acc);
    }
    // path count is g^L, so the digit width recovers g
    if (r.blocks > 0 && !r.path_accuracy.empty())
        r.groups = static_cast<std::size_t>(std::llround(
            std::pow(static_cast<double>(r.path_accuracy.size()),
                     1.0 / static_cast<double>(r.blocks))));
    return r;
}

MetricsSummary summarize_metrics(const std::string& log_text) {
    struct Acc {
        std::size_t steps = 0;
        double loss = 0.0, kd = 0.0, collapse = 0.0;
    };
    std::map<std::size_t, Acc> phases;
    for (const auto& raw : split(log_text, '\n')) {
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        auto kv = parse_kv_line(line);
        if (!kv.count("phase") || !kv.count("loss")) continue;
        auto& acc = phases[*parse_u64(kv.at("phase"))];
        ++acc.steps;
        acc.loss += *parse_double(kv.at("loss"));
        acc.kd += *parse_double(kv.at("kd"));
        acc.collapse += *parse_double(kv.at("collapse"));
    }
    MetricsSummary out;
    for (const auto& [phase, acc] : phases) {
        MetricsSummary::Phase p;
        p.phase = phase;
        p.steps = acc.steps;
        p.mean_loss = acc.loss / static_cast<double>(acc.steps);
        p.mean_kd = acc.kd / static_cast<double>(acc.steps);
        p.mean_collapse = acc.collapse / static_cast<double>(acc.steps);
        out.phases.push_back(p);
    }
    return out;
}

std::string render_report(const std::vector<RouteReport>& routes,
                          const std::vector<std::string>& route_names,
                          const MetricsSummary* metrics) {
    std::string out;
    for (std::size_t r = 0; r < routes.size(); ++r) {
        const auto& report = routes[r];
        const std::string name = r < route_names.size() ? route_names[r] : report.task_name;
        out += "== route: " + name + " ==\n";
        out += "task=" + report.task_name + " paths=" + format_u64(report.path_accuracy.size()) +
               " k=" + format_u64(report.knn_k) + " seed=" + format_u64(report.seed) + "\n";
        for (std::size_t i = 0; i < report.path_accuracy.size(); ++i)
            out += "  path " + format_u64(i) + ": acc=" +
                   format_fixed(report.path_accuracy[i], 6) + " gain=" +
                   format_fixed(report.path_accuracy[i] - report.full_accuracy, 6) + "\n";
        out += "  full net reference: acc=" + format_fixed(report.full_accuracy, 6) + "\n";
        out += "  best: " +
               (report.best_is_full ? std::string("full") : "path " + format_u64(report.best_path)) +
               " acc=" + format_fixed(report.best_accuracy, 6) + "\n";
        out += "  path acc mean=" + format_fixed(mean_of(report.path_accuracy), 6) +
               " std=" + format_fixed(std_of(report.path_accuracy), 6) + "\n";

        // histogram of per-path gains vs the full-net entry
        std::vector<double> gains;
        for (double a : report.path_accuracy) gains.push_back(a - report.full_accuracy);
        const double lo = *std::min_element(gains.begin(), gains.end());
        const double hi = *std::max_element(gains.begin(), gains.end());
        const std::size_t bins = std::min<std::size_t>(8, std::max<std::size_t>(1, gains.size()));
        const double width = (hi - lo) / static_cast<double>(bins);
        out += "  gain histogram:\n";
        std::vector<std::size_t> counts(bins, 0);
        for (double gv : gains) {
            std::size_t b = width > 0.0 ? static_cast<std::size_t>((gv - lo) / width) : 0;
            if (b >= bins) b = bins - 1;
            ++counts[b];
        }
        for (std::size_t b = 0; b < bins; ++b) {
            const double bin_lo = lo + width * static_cast<double>(b);
            out += "    [" + format_fixed(bin_lo, 4) + ", " + format_fixed(bin_lo + width, 4) +
                   ") " + format_u64(counts[b]) + " ";
            out += std::string(counts[b], '#');
            out += "\n";
        }
    }

    if (routes.size() == 2) {
        out += "== per-path accuracy spread ==\n";
        for (std::size_t r = 0; r < 2; ++r) {
            const std::string name = r < route_names.size() ? route_names[r]
                                                            : routes[r].task_name;
            out += "  " + name + ": std=" + format_fixed(std_of(routes[r].path_accuracy), 6) +
                   "\n";
        }
    }

    if (metrics != nullptr) {
        out += "== training metrics ==\n";
        for (const auto& p : metrics->phases) {
            out += "  phase " + format_u64(p.phase) + ": steps=" + format_u64(p.steps) +
                   " mean_loss=" + format_fixed(p.mean_loss, 6) +
                   " mean_kd=" + format_fixed(p.mean_kd, 6) +
                   " mean_collapse=" + format_fixed(p.mean_collapse, 6) + "\n";
        }
    }
    return out;
}

std::string render_gains_columns(const RouteReport& report) {
    std::string out = "# path gain_vs_full\n";
    for (std::size_t i = 0; i < report.path_accuracy.size(); ++i)
        out += format_u64(i) + " " +
               format_fixed(report.path_accuracy[i] - report.full_accuracy, 6) + "\n";
    return out;
}

} // namespace sdr
