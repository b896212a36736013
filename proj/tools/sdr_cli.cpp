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
#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "sdr/pipeline.hpp"
#include "sdr/text.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::string seed_override;
};

sdr::Config load_config(const GlobalArgs& args) {
    sdr::Config cfg = args.config_path.empty() ? sdr::Config::defaults()
                                               : sdr::Config::load(args.config_path);
    if (!args.seed_override.empty()) cfg.set("seed", args.seed_override);
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"scalable dynamic routing: cluster, pre-train, route, deploy"};
    app.require_subcommand(1);

    GlobalArgs global;
    app.add_option("--config", global.config_path, "config file (key = value lines)");
    app.add_option("--out", global.out_dir, "output directory for all artifacts");
    app.add_option("--seed", global.seed_override, "override the config seed");

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset and tasks");
    auto* base = app.add_subcommand("pretrain-base",
                                    "pre-train the single-path baseline on all data");
    auto* feat = app.add_subcommand("extract-features",
                                    "dump backbone features of the baseline model");
    auto* clus = app.add_subcommand("cluster", "cluster the frozen features into k subsets");
    auto* sdrt = app.add_subcommand("pretrain-sdr",
                                    "progressively pre-train the routed network");

    auto* rout = app.add_subcommand("route", "evaluate every sub-net on a downstream task");
    std::string task_train, task_eval, task_name = "task";
    rout->add_option("--task-train", task_train, "task training csv (with labels)")
        ->required();
    rout->add_option("--task-eval", task_eval, "task eval csv (with labels)")->required();
    rout->add_option("--task-name", task_name, "name used in the report");

    auto* expo = app.add_subcommand("export", "write a standalone sub-net checkpoint");
    std::size_t path_index = 0;
    expo->add_option("--path", path_index, "path index to export")->required();

    auto* repo = app.add_subcommand("report", "render accuracy tables and gain histograms");
    std::vector<std::string> route_files;
    std::string metrics_file;
    bool gnuplot = false;
    repo->add_option("--route", route_files, "route report file(s); two enable comparison")
        ->required();
    repo->add_option("--metrics", metrics_file, "metrics log to summarize");
    repo->add_flag("--gnuplot", gnuplot, "also write gnuplot-friendly gain columns");

    CLI11_PARSE(app, argc, argv);

    try {
        const sdr::Config cfg = load_config(global);
        const sdr::pipeline::Paths paths{global.out_dir};
        if (gen->parsed()) {
            sdr::pipeline::gen_data_stage(cfg, paths);
            std::printf("wrote %s\n", paths.dataset_csv().c_str());
        } else if (base->parsed()) {
            sdr::pipeline::pretrain_base_stage(cfg, paths);
            std::printf("wrote %s\n", paths.base_ckpt().c_str());
        } else if (feat->parsed()) {
            sdr::pipeline::extract_features_stage(cfg, paths);
            std::printf("wrote %s\n", paths.features_ckpt().c_str());
        } else if (clus->parsed()) {
            sdr::pipeline::cluster_stage(cfg, paths);
            std::printf("wrote %s\n", paths.splits_tsv().c_str());
        } else if (sdrt->parsed()) {
            sdr::pipeline::pretrain_sdr_stage(cfg, paths);
            std::printf("wrote %s\n", paths.sdr_ckpt().c_str());
        } else if (rout->parsed()) {
            const auto report =
                sdr::pipeline::route_stage(cfg, paths, task_train, task_eval, task_name);
            std::printf("%s", sdr::render_route_report(report).c_str());
            std::printf("wrote %s\n", paths.route_txt(task_name).c_str());
        } else if (expo->parsed()) {
            sdr::pipeline::export_stage(cfg, paths, path_index);
            std::printf("wrote %s\n", paths.subnet_ckpt(path_index).c_str());
        } else if (repo->parsed()) {
            const std::string text =
                sdr::pipeline::report_stage(cfg, paths, route_files, metrics_file, gnuplot);
            std::printf("%s", text.c_str());
            std::printf("wrote %s\n", paths.report_txt().c_str());
        }
    } catch (const sdr::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
