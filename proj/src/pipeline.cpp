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
#include "sdr/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "sdr/text.hpp"

namespace sdr::pipeline {

namespace {

void require_artifact(const std::string& path, const std::string& producer) {
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("missing artifact '" + path + "'; run `" + producer +
                                   "` first");
}

void put_arch(Checkpoint& ck, const NetConfig& c) {
    ck.metadata["arch.input_dim"] = format_u64(c.input_dim);
    ck.metadata["arch.blocks"] = format_u64(c.blocks);
    ck.metadata["arch.groups"] = format_u64(c.groups);
    ck.metadata["arch.shared_width"] = format_u64(c.shared_width);
    ck.metadata["arch.individual_width"] = format_u64(c.individual_width);
    ck.metadata["arch.stem_dim"] = format_u64(c.stem_dim);
    ck.metadata["arch.proj0"] = format_u64(c.proj_dims[0]);
    ck.metadata["arch.proj1"] = format_u64(c.proj_dims[1]);
    ck.metadata["arch.pred0"] = format_u64(c.pred_dims[0]);
    ck.metadata["arch.bn_affine"] = c.bn_affine ? "true" : "false";
}

NetConfig arch_from(const Checkpoint& ck) {
    NetConfig c;
    c.input_dim = *parse_u64(ck.meta("arch.input_dim"));
    c.blocks = *parse_u64(ck.meta("arch.blocks"));
    c.groups = *parse_u64(ck.meta("arch.groups"));
    c.shared_width = *parse_u64(ck.meta("arch.shared_width"));
    c.individual_width = *parse_u64(ck.meta("arch.individual_width"));
    c.stem_dim = *parse_u64(ck.meta("arch.stem_dim"));
    c.proj_dims = {*parse_u64(ck.meta("arch.proj0")), *parse_u64(ck.meta("arch.proj1"))};
    c.pred_dims = {*parse_u64(ck.meta("arch.pred0")), *parse_u64(ck.meta("arch.proj1"))};
    c.bn_affine = ck.meta("arch.bn_affine") == "true";
    return c;
}

void put_config_snapshot(Checkpoint& ck, const Config& config) {
    for (const auto& raw : split(config.snapshot(), '\n')) {
        if (raw.empty()) continue;
        const auto eq = raw.find('=');
        ck.metadata["cfg." + raw.substr(0, eq)] = raw.substr(eq + 1);
    }
}

Dataset load_dataset(const Paths& paths) {
    require_artifact(paths.dataset_csv(), "gen-data");
    return ingest_csv(paths.dataset_csv());
}

} // namespace

void save_net_checkpoint(const std::string& path, const SdrNet& net, const Config& config,
                         const std::string& kind, std::size_t step, std::size_t phase) {
    Checkpoint ck;
    ck.metadata["kind"] = kind;
    ck.metadata["step"] = format_u64(step);
    ck.metadata["phase"] = format_u64(phase);
    put_arch(ck, net.config());
    put_config_snapshot(ck, config);
    for (const auto& p : net.params()) ck.tensors.emplace_back(p.name, p.value);
    ck.save(path);
}

SdrNet load_net_checkpoint(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    SdrNet net(arch_from(ck));
    for (auto& p : net.params()) p.value = ck.tensor(p.name);
    net.mark_mutated();
    return net;
}

void save_features(const std::string& path, const Tensor2D& features, const Config& config) {
    Checkpoint ck;
    ck.metadata["kind"] = "features";
    ck.metadata["count"] = format_u64(features.rows());
    ck.metadata["dim"] = format_u64(features.cols());
    put_config_snapshot(ck, config);
    ck.tensors.emplace_back("features", features);
    ck.save(path);
}

FeatureTable load_features(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    if (ck.meta("kind") != "features")
        throw IoError(path + ": not a feature checkpoint");
    FeatureTable table = FeatureTable::with_default_ids(ck.tensor("features"));
    table.validate();
    return table;
}

void save_subnet_checkpoint(const std::string& path, const ExportedSubnet& subnet,
                            const Config& config, std::size_t path_index) {
    Checkpoint ck;
    ck.metadata["kind"] = "subnet";
    ck.metadata["source_path"] = format_u64(path_index);
    put_arch(ck, subnet.net.config());
    put_config_snapshot(ck, config);
    for (const auto& p : subnet.net.params()) ck.tensors.emplace_back(p.name, p.value);
    for (std::size_t l = 0; l < subnet.stats.size(); ++l) {
        const auto& s = subnet.stats[l];
        Tensor2D mean(1, s.mean.size()), var(1, s.var.size());
        std::copy(s.mean.begin(), s.mean.end(), mean.data().begin());
        std::copy(s.var.begin(), s.var.end(), var.data().begin());
        ck.tensors.emplace_back("stats.block" + format_u64(l) + ".mean", std::move(mean));
        ck.tensors.emplace_back("stats.block" + format_u64(l) + ".var", std::move(var));
    }
    ck.save(path);
}

std::pair<SdrNet, BnStats> load_subnet_checkpoint(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    if (ck.meta("kind") != "subnet") throw IoError(path + ": not a sub-net checkpoint");
    SdrNet net(arch_from(ck));
    for (auto& p : net.params()) p.value = ck.tensor(p.name);
    net.mark_mutated();

    std::vector<BnBlockStats> stats(net.config().blocks);
    for (std::size_t l = 0; l < stats.size(); ++l) {
        const auto& mean = ck.tensor("stats.block" + format_u64(l) + ".mean");
        const auto& var = ck.tensor("stats.block" + format_u64(l) + ".var");
        stats[l].mean = mean.data();
        stats[l].var = var.data();
    }
    BnStats registry;
    // a standalone net is single-group: full and path0 coincide
    registry.put("full", stats);
    registry.put("path0", std::move(stats));
    return {std::move(net), std::move(registry)};
}

void gen_data_stage(const Config& config, const Paths& paths) {
    config.validate();
    std::filesystem::create_directories(paths.out);
    const SyntheticSpec spec = config.synthetic_spec();
    const SyntheticData data = gen_data(spec);

    Dataset ds;
    ds.samples = data.samples;
    ds.labels.reserve(data.supercluster.size());
    for (std::size_t s : data.supercluster) ds.labels.push_back(static_cast<int>(s));
    export_csv(paths.dataset_csv(), ds);

    std::string truth = "index\tsupercluster\tsubcluster\n";
    for (std::size_t i = 0; i < data.supercluster.size(); ++i)
        truth += format_u64(i) + "\t" + format_u64(data.supercluster[i]) + "\t" +
                 format_u64(data.subcluster[i]) + "\n";
    write_file_atomic(paths.truth_tsv(), truth);

    for (std::size_t c = 0; c < spec.superclusters; ++c) {
        const DownstreamTask task = gen_task(spec, config.task_spec(c, 0));
        Dataset train{task.train.samples, task.train.labels};
        Dataset eval{task.eval.samples, task.eval.labels};
        export_csv(paths.task_train_csv(c), train);
        export_csv(paths.task_eval_csv(c), eval);
    }
}

void pretrain_base_stage(const Config& config, const Paths& paths) {
    config.validate();
    const Dataset data = load_dataset(paths);

    // one cluster holding everything: the g=1 twin has a single path
    std::vector<std::size_t> labels(data.count(), 0);
    const DatasetSplit split = split_dataset(labels, 1);

    SdrNet net = train(config.base_net_config(), config.base_train_config(), split,
                       data.samples, config.seed(), nullptr);
    save_net_checkpoint(paths.base_ckpt(), net, config, "base",
                        config.base_train_config().steps_per_phase[0], 0);
}

void extract_features_stage(const Config& config, const Paths& paths) {
    config.validate();
    const Dataset data = load_dataset(paths);
    require_artifact(paths.base_ckpt(), "pretrain-base");
    const SdrNet net = load_net_checkpoint(paths.base_ckpt());

    BnStats registry;
    bn_calibrate_into(registry, net, NetTarget::full(), data.samples,
                      config.routing_config().bn_batch);
    const Tensor2D features = extract_features(net, NetTarget::full(), data.samples, registry);
    save_features(paths.features_ckpt(), features, config);
}

void cluster_stage(const Config& config, const Paths& paths) {
    config.validate();
    require_artifact(paths.features_ckpt(), "extract-features");
    const FeatureTable table = load_features(paths.features_ckpt());

    Rng rng(config.seed());
    const ClusterModel model =
        cluster(table, config.cluster_k(), config.cluster_epochs(), rng,
                config.cluster_config());
    const DatasetSplit split = split_dataset(model.hard_labels, config.cluster_k());
    save_split(paths.splits_tsv(), split);
}

void pretrain_sdr_stage(const Config& config, const Paths& paths) {
    config.validate();
    const Dataset data = load_dataset(paths);
    require_artifact(paths.splits_tsv(), "cluster");
    const DatasetSplit split = load_split(paths.splits_tsv());

    std::ofstream log(paths.metrics_log(), std::ios::trunc);
    if (!log) throw IoError("cannot open '" + paths.metrics_log() + "' for writing");
    auto sink = [&log](const StepMetrics& m) { log << render_metrics_line(m) << "\n"; };

    const TrainConfig tc = config.train_config();
    SdrNet net = train(config.net_config(), tc, split, data.samples, config.seed(), sink);

    std::size_t total = 0;
    for (std::size_t s : tc.steps_per_phase) total += s;
    save_net_checkpoint(paths.sdr_ckpt(), net, config, "sdr", total, net.config().blocks);
}

RouteReport route_stage(const Config& config, const Paths& paths,
                        const std::string& task_train_csv, const std::string& task_eval_csv,
                        const std::string& task_name) {
    config.validate();
    const Dataset data = load_dataset(paths);
    require_artifact(paths.splits_tsv(), "cluster");
    const DatasetSplit split = load_split(paths.splits_tsv());
    require_artifact(paths.sdr_ckpt(), "pretrain-sdr");
    const SdrNet net = load_net_checkpoint(paths.sdr_ckpt());

    require_artifact(task_train_csv, "gen-data");
    require_artifact(task_eval_csv, "gen-data");
    const Dataset train_ds = ingest_csv(task_train_csv);
    const Dataset eval_ds = ingest_csv(task_eval_csv);
    if (!train_ds.has_labels() || !eval_ds.has_labels())
        throw ParseError("route: task csv files must carry a label column");

    DownstreamTask task;
    task.name = task_name;
    task.train = {train_ds.samples, train_ds.labels};
    task.eval = {eval_ds.samples, eval_ds.labels};

    BnStats registry;
    const RouteReport report = route(net, registry, split, data.samples, task,
                                     config.routing_config(), config.seed());
    write_file_atomic(paths.route_txt(task_name), render_route_report(report));
    return report;
}

void export_stage(const Config& config, const Paths& paths, std::size_t path_index) {
    config.validate();
    const Dataset data = load_dataset(paths);
    require_artifact(paths.splits_tsv(), "cluster");
    const DatasetSplit split = load_split(paths.splits_tsv());
    require_artifact(paths.sdr_ckpt(), "pretrain-sdr");
    const SdrNet net = load_net_checkpoint(paths.sdr_ckpt());

    const NetConfig& nc = net.config();
    SDR_CHECK(path_index < nc.path_count(), "export: path index out of range");
    const PathCode path = path_decode(path_index, nc.groups, nc.blocks);

    Tensor2D subset(split.subsets[path_index].size(), data.samples.cols());
    for (std::size_t i = 0; i < split.subsets[path_index].size(); ++i) {
        auto src = data.samples.row(split.subsets[path_index][i]);
        std::copy(src.begin(), src.end(), subset.row(i).begin());
    }
    BnStats registry;
    bn_calibrate_into(registry, net, NetTarget::path(path), subset,
                      config.routing_config().bn_batch);
    const ExportedSubnet subnet = export_subnet(net, path, registry);
    save_subnet_checkpoint(paths.subnet_ckpt(path_index), subnet, config, path_index);
}

std::string report_stage(const Config& config, const Paths& paths,
                         const std::vector<std::string>& route_files,
                         const std::string& metrics_file, bool gnuplot) {
    config.validate();
    SDR_CHECK(!route_files.empty(), "report: needs at least one route report file");
    std::vector<RouteReport> reports;
    std::vector<std::string> names;
    for (const auto& f : route_files) {
        require_artifact(f, "route");
        reports.push_back(parse_route_report(read_file(f)));
        names.push_back(std::filesystem::path(f).filename().string());
    }
    MetricsSummary metrics;
    bool have_metrics = false;
    if (!metrics_file.empty()) {
        require_artifact(metrics_file, "pretrain-sdr");
        metrics = summarize_metrics(read_file(metrics_file));
        have_metrics = true;
    }
    const std::string text =
        render_report(reports, names, have_metrics ? &metrics : nullptr);
    write_file_atomic(paths.report_txt(), text);
    if (gnuplot) write_file_atomic(paths.gains_dat(), render_gains_columns(reports.front()));
    return text;
}

} // namespace sdr::pipeline
