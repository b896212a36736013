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
#include "sdr/routing.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <set>
#include <thread>

#include "sdr/text.hpp"

namespace sdr {

namespace {

std::size_t effective_threads(std::size_t requested, std::size_t jobs) {
    std::size_t n = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* cap = std::getenv("SDR_THREADS")) {
        if (auto parsed = parse_u64(cap); parsed && *parsed >= 1)
            n = std::min<std::size_t>(n, *parsed);
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Runs fn(0..jobs-1) across a small fan-out; each job writes only its own
/// slot, so the fan-out never changes results.
template <typename Fn>
void parallel_for(std::size_t jobs, std::size_t threads, Fn&& fn) {
    if (threads <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

Tensor2D gather_rows(const Tensor2D& data, const std::vector<std::size_t>& rows) {
    Tensor2D out(rows.size(), data.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = data.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

} // namespace

void DownstreamTask::validate() const {
    SDR_CHECK(train.samples.rows() == train.labels.size(),
              "DownstreamTask: train sample/label count mismatch");
    SDR_CHECK(eval.samples.rows() == eval.labels.size(),
              "DownstreamTask: eval sample/label count mismatch");
    SDR_CHECK(train.samples.rows() >= 1, "DownstreamTask: empty train split");
    std::set<int> seen(train.labels.begin(), train.labels.end());
    for (int l : eval.labels)
        SDR_CHECK(seen.count(l) == 1,
                  "DownstreamTask: eval label " + std::to_string(l) + " never seen in train");
}

Tensor2D extract_features(const SdrNet& net, const NetTarget& target, const Tensor2D& samples,
                          const BnStats& bn) {
    auto out = net.forward(target, samples, RunMode::eval, &bn);
    Tensor2D feats = std::move(out.backbone);
    l2_normalize_rows(feats);
    return feats;
}

std::vector<int> knn_predict(const Tensor2D& train_feats, const std::vector<int>& train_labels,
                             const Tensor2D& query_feats, std::size_t k, bool weighted) {
    const std::size_t n = train_feats.rows();
    SDR_CHECK(n >= 1, "knn_predict: empty training set");
    SDR_CHECK(k >= 1, "knn_predict: k must be >= 1");
    SDR_CHECK(train_labels.size() == n, "knn_predict: label count mismatch");
    SDR_CHECK_SHAPE(train_feats.cols() == query_feats.cols(),
                    "knn_predict: feature dimensions disagree");
    const std::size_t kk = std::min(k, n);

    std::vector<int> out(query_feats.rows());
    std::vector<std::pair<double, std::size_t>> sims(n);
    for (std::size_t q = 0; q < query_feats.rows(); ++q) {
        for (std::size_t i = 0; i < n; ++i)
            sims[i] = {dot(query_feats.row(q), train_feats.row(i)), i};
        std::partial_sort(sims.begin(), sims.begin() + kk, sims.end(),
                          [](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first > b.first;
                              return a.second < b.second;
                          });
        // label -> (count, summed similarity); map order = ascending label,
        // so strict improvement keeps the lowest class id on full ties
        std::map<int, std::pair<std::size_t, double>> votes;
        for (std::size_t i = 0; i < kk; ++i) {
            auto& v = votes[train_labels[sims[i].second]];
            v.first += 1;
            v.second += sims[i].first;
        }
        int best_label = votes.begin()->first;
        auto best = votes.begin()->second;
        for (const auto& [label, v] : votes) {
            const bool better =
                weighted ? v.second > best.second
                         : (v.first > best.first ||
                            (v.first == best.first && v.second > best.second));
            if (better) {
                best_label = label;
                best = v;
            }
        }
        out[q] = best_label;
    }
    return out;
}

double knn_accuracy(const Tensor2D& train_feats, const std::vector<int>& train_labels,
                    const Tensor2D& eval_feats, const std::vector<int>& eval_labels,
                    std::size_t k, bool weighted) {
    SDR_CHECK(eval_feats.rows() == eval_labels.size(), "knn_accuracy: label count mismatch");
    SDR_CHECK(eval_feats.rows() >= 1, "knn_accuracy: empty eval split");
    const auto pred = knn_predict(train_feats, train_labels, eval_feats, k, weighted);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == eval_labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::string render_route_report(const RouteReport& r) {
    std::string out;
    out += "task=" + r.task_name + "\n";
    out += "k=" + format_u64(r.knn_k) + "\n";
    out += "seed=" + format_u64(r.seed) + "\n";
    out += "tiebreak=" + (r.tie_note.empty() ? std::string("none") : r.tie_note) + "\n";
    for (std::size_t i = 0; i < r.path_accuracy.size(); ++i) {
        const auto digits = path_decode(i, r.groups, r.blocks).digits;
        std::string ds;
        for (std::size_t d : digits) ds += format_u64(d);
        out += "path=" + format_u64(i) + " digits=" + ds + " acc=" +
               format_fixed(r.path_accuracy[i], 6) + "\n";
    }
    out += "path=full acc=" + format_fixed(r.full_accuracy, 6) + "\n";
    out += "best=" + (r.best_is_full ? std::string("full") : format_u64(r.best_path)) +
           " acc=" + format_fixed(r.best_accuracy, 6) + "\n";
    return out;
}

RouteReport route(const SdrNet& net, BnStats& registry, const DatasetSplit& splits,
                  const Tensor2D& data, const DownstreamTask& task, const RoutingConfig& cfg,
                  std::uint64_t seed) {
    task.validate();
    const NetConfig& nc = net.config();
    const std::size_t paths = nc.path_count();
    SDR_CHECK(splits.cluster_count() == paths,
              "route: split count does not match the network's path count");
    const std::size_t effective_k = std::min(cfg.knn_k, task.train.samples.rows());

    RouteReport report;
    report.task_name = task.name;
    report.knn_k = effective_k;
    report.seed = seed;
    report.groups = nc.groups;
    report.blocks = nc.blocks;
    report.path_accuracy.assign(paths, 0.0);

    std::mutex calibration_mutex;
    auto evaluate = [&](const NetTarget& target) {
        const std::string key = target.key(nc.groups);
        bool needs = false;
        {
            std::lock_guard<std::mutex> lock(calibration_mutex);
            needs = !registry.has(key);
        }
        if (needs) {
            const Tensor2D subset =
                target.is_full()
                    ? data
                    : gather_rows(data, splits.subsets[path_index(target.path_code(),
                                                                  nc.groups)]);
            auto stats = bn_calibrate(net, target, subset, cfg.bn_batch);
            std::lock_guard<std::mutex> lock(calibration_mutex);
            if (!registry.has(key)) registry.put(key, std::move(stats));
        }
        const Tensor2D train_feats = extract_features(net, target, task.train.samples, registry);
        const Tensor2D eval_feats = extract_features(net, target, task.eval.samples, registry);
        return knn_accuracy(train_feats, task.train.labels, eval_feats, task.eval.labels,
                            effective_k, cfg.weighted_vote);
    };

    const std::size_t jobs = paths + 1;
    parallel_for(jobs, effective_threads(cfg.threads, jobs), [&](std::size_t i) {
        if (i < paths)
            report.path_accuracy[i] = evaluate(NetTarget::path(path_decode(i, nc.groups,
                                                                           nc.blocks)));
        else
            report.full_accuracy = evaluate(NetTarget::full());
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < paths; ++i)
        if (report.path_accuracy[i] > report.path_accuracy[best]) best = i;
    std::vector<std::size_t> tied;
    for (std::size_t i = 0; i < paths; ++i)
        if (report.path_accuracy[i] == report.path_accuracy[best]) tied.push_back(i);
    if (tied.size() > 1) {
        std::string note = "paths";
        for (std::size_t i : tied) note += " " + format_u64(i);
        note += " tied; lowest index selected";
        report.tie_note = note;
    }
    report.best_path = best;
    report.best_accuracy = report.path_accuracy[best];
    // the full net is the reference entry; it wins only by strictly beating
    // every path
    if (report.full_accuracy > report.best_accuracy) {
        report.best_is_full = true;
        report.best_accuracy = report.full_accuracy;
    }
    return report;
}

ExportedSubnet export_subnet(const SdrNet& net, const PathCode& path, const BnStats& registry) {
    const NetConfig& src = net.config();
    const std::string key = NetTarget::path(path).key(src.groups);
    const auto& stats = registry.get(key); // throws CalibrationError when absent

    NetConfig cfg = src;
    cfg.groups = 1;
    SdrNet out(cfg);
    for (auto& p : out.params()) {
        std::string source_name = p.name;
        // the path's group j becomes the standalone net's group 0
        const auto pos = source_name.find("ind0");
        if (pos != std::string::npos) {
            std::size_t block = 0;
            if (source_name.rfind("block", 0) == 0)
                block = *parse_u64(split(source_name, '.')[0].substr(5));
            source_name.replace(pos, 4, "ind" + format_u64(path.digits[block]));
        }
        p.value = net.param(source_name).value;
    }
    out.mark_mutated();
    return ExportedSubnet{std::move(out), stats};
}

} // namespace sdr
