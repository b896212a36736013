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
#include <doctest.h>

#include <filesystem>

#include "oracles.hpp"
#include "sdr/checkpoint.hpp"
#include "sdr/config.hpp"
#include "sdr/dataset.hpp"
#include "sdr/pipeline.hpp"
#include "sdr/report.hpp"
#include "sdr/synthetic.hpp"
#include "sdr/text.hpp"

using namespace sdr;

namespace {

std::string temp_dir() {
    static int counter = 0;
    const auto dir =
        std::filesystem::temp_directory_path() / ("sdr_test_" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir.string();
}

} // namespace

TEST_CASE("config: parsing, comments, sections, unknown keys") {
    const std::string text =
        "# reference run\n"
        "seed = 7\n"
        "net.g = 2\n"
        "net.L = 2\n"
        "cluster.k = 4\n"
        "\n"
        "train.lr = 0.01\n";
    auto cfg = Config::from_string(text);
    CHECK(cfg.seed() == 7);
    CHECK(cfg.get_f64("train.lr") == 0.01);
    CHECK(cfg.get_u64("net.g") == 2);
    // untouched keys fall back to defaults
    CHECK(cfg.get_u64("train.batch") == 64);

    CHECK_THROWS_AS(Config::from_string("net.gg = 2\n"), ConfigError);
    CHECK_THROWS_AS(Config::from_string("net.g\n"), ParseError);
}

TEST_CASE("config: k must equal g^L and the message names both") {
    auto cfg = Config::from_string("net.g = 2\nnet.L = 3\ncluster.k = 4\n");
    try {
        cfg.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("cluster.k=4") != std::string::npos);
        CHECK(msg.find("net.g^net.L=8") != std::string::npos);
    }
}

TEST_CASE("config: snapshot is sorted and stable") {
    auto a = Config::from_string("seed = 5\nnet.g = 2\n");
    auto b = Config::from_string("net.g = 2\nseed = 5\n");
    CHECK(a.snapshot() == b.snapshot());
    CHECK(a.snapshot().find("seed=5\n") != std::string::npos);
}

TEST_CASE("config: phase budget split") {
    auto cfg = Config::from_string(
        "net.L = 2\ntrain.total_steps = 1000\ntrain.phase0_frac = 0.3\n");
    auto tc = cfg.train_config();
    REQUIRE(tc.steps_per_phase.size() == 3);
    CHECK(tc.steps_per_phase[0] == 300);
    CHECK(tc.steps_per_phase[1] == 350);
    CHECK(tc.steps_per_phase[2] == 350);
    CHECK(tc.steps_per_phase[0] + tc.steps_per_phase[1] + tc.steps_per_phase[2] == 1000);

    auto base = cfg.base_train_config();
    CHECK(base.steps_per_phase[0] == 1500);
    CHECK(base.steps_per_phase[1] == 0);
    CHECK(base.lambda_kd == 0.0);
}

TEST_CASE("checkpoint: byte-identical round trip and checksum refusal") {
    Checkpoint ck;
    ck.metadata["kind"] = "test";
    ck.metadata["step"] = "12";
    Rng rng(3);
    Tensor2D t(3, 4);
    for (double& v : t.data()) v = rng.normal();
    ck.tensors.emplace_back("alpha.w", t);
    ck.tensors.emplace_back("alpha.b", Tensor2D(1, 4));

    const auto bytes = ck.serialize();
    auto ck2 = Checkpoint::deserialize(bytes);
    const auto bytes2 = ck2.serialize();
    CHECK(bytes == bytes2);
    CHECK(ck2.meta("kind") == "test");
    CHECK(ck2.tensor("alpha.w").data() == t.data());

    auto corrupted = bytes;
    corrupted[20] ^= 0xff;
    CHECK_THROWS_AS(Checkpoint::deserialize(corrupted), IoError);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(Checkpoint::deserialize(bad_magic), IoError);

    const std::string dir = temp_dir();
    ck.save(dir + "/a.ckpt");
    auto loaded = Checkpoint::load(dir + "/a.ckpt");
    loaded.save(dir + "/b.ckpt");
    CHECK(read_file(dir + "/a.ckpt") == read_file(dir + "/b.ckpt"));
}

TEST_CASE("csv: round trip to 17 significant digits, labels, parse errors") {
    const std::string dir = temp_dir();
    Dataset ds;
    ds.samples = Tensor2D::from_rows({{0.1, 1.0 / 3.0}, {-2.5e-17, 12345.6789012345678}});
    ds.labels = {3, 1};
    export_csv(dir + "/d.csv", ds);
    auto back = ingest_csv(dir + "/d.csv");
    CHECK(back.samples.data() == ds.samples.data()); // exact doubles
    CHECK(back.labels == ds.labels);

    // a second export of the ingested data is byte-identical
    export_csv(dir + "/d2.csv", back);
    CHECK(read_file(dir + "/d.csv") == read_file(dir + "/d2.csv"));

    write_file_atomic(dir + "/short.csv", "x0,x1\n1.0\n");
    try {
        ingest_csv(dir + "/short.csv");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }

    write_file_atomic(dir + "/nan.csv", "x0,x1\n1.0,nan\n");
    CHECK_THROWS_AS(ingest_csv(dir + "/nan.csv"), ParseError);

    write_file_atomic(dir + "/unlabeled.csv", "x0,x1\n1.0,2.0\n");
    auto unl = ingest_csv(dir + "/unlabeled.csv");
    CHECK(!unl.has_labels());
}

TEST_CASE("raw binary: round trip and size validation") {
    const std::string dir = temp_dir();
    Rng rng(5);
    Tensor2D t(4, 3);
    for (double& v : t.data()) v = rng.normal();
    export_raw(dir + "/d.raw", t);
    auto back = ingest_raw(dir + "/d.raw");
    CHECK(back.samples.data() == t.data());

    auto content = read_file(dir + "/d.raw");
    content.pop_back();
    write_file_atomic(dir + "/trunc.raw", content);
    CHECK_THROWS_AS(ingest_raw(dir + "/trunc.raw"), ParseError);
}

TEST_CASE("split file: save/load round trip") {
    const std::string dir = temp_dir();
    auto split = split_dataset({0, 1, 2, 0, 1, 2, 0}, 3);
    save_split(dir + "/s.tsv", split);
    auto back = load_split(dir + "/s.tsv");
    CHECK(back.subsets == split.subsets);
    CHECK(back.total == split.total);

    write_file_atomic(dir + "/bad.tsv", "0\t0\n2\t1\n");
    CHECK_THROWS_AS(load_split(dir + "/bad.tsv"), ParseError);
}

TEST_CASE("gen_data: determinism, labeling, separation control") {
    SyntheticSpec spec;
    spec.superclusters = 3;
    spec.subclusters = 2;
    spec.samples_per_subcluster = 20;
    spec.dim = 8;
    spec.separation = 8.0;
    spec.noise = 0.5;
    spec.seed = 11;

    auto a = gen_data(spec);
    auto b = gen_data(spec);
    CHECK(a.samples.data() == b.samples.data());
    CHECK(a.supercluster == b.supercluster);
    CHECK(a.samples.rows() == 3 * 2 * 20);

    // well separated: raw-feature clustering recovers the partition exactly
    Tensor2D feats = a.samples;
    l2_normalize_rows(feats);
    auto table = FeatureTable::with_default_ids(feats);
    Rng crng(13);
    auto model = cluster(table, 3, 30, crng, {});
    CHECK(sdr::test::adjusted_rand_index(model.hard_labels, a.supercluster) ==
          doctest::Approx(1.0));

    // zero separation: structure collapses to chance
    SyntheticSpec flat = spec;
    flat.separation = 0.0;
    auto c = gen_data(flat);
    Tensor2D cf = c.samples;
    l2_normalize_rows(cf);
    auto ct = FeatureTable::with_default_ids(cf);
    Rng crng2(13);
    auto cm = cluster(ct, 3, 30, crng2, {});
    CHECK(sdr::test::adjusted_rand_index(cm.hard_labels, c.supercluster) < 0.2);
}

TEST_CASE("gen_task: nested, balanced, disjoint, deterministic") {
    SyntheticSpec spec;
    spec.superclusters = 4;
    spec.dim = 16;
    spec.seed = 17;
    TaskSpec ts;
    ts.supercluster = 2;
    ts.classes = 3;
    ts.train_per_class = 10;
    ts.eval_per_class = 4;
    ts.offset = 1.0;
    ts.noise = 0.3;
    ts.seed = 23;

    auto t1 = gen_task(spec, ts);
    auto t2 = gen_task(spec, ts);
    CHECK(t1.train.samples.data() == t2.train.samples.data());
    CHECK(t1.eval.samples.data() == t2.eval.samples.data());
    CHECK(t1.train.samples.rows() == 30);
    CHECK(t1.eval.samples.rows() == 12);

    // samples concentrate near their supercluster mean
    const auto means = supercluster_means(spec);
    for (std::size_t i = 0; i < t1.train.samples.rows(); ++i) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < spec.dim; ++j) {
            const double d = t1.train.samples(i, j) - means[2][j];
            d2 += d * d;
        }
        CHECK(std::sqrt(d2) < spec.separation);
    }
}

TEST_CASE("report: route report parses back and summary renders") {
    RouteReport r;
    r.task_name = "toy";
    r.knn_k = 25;
    r.seed = 9;
    r.groups = 2;
    r.blocks = 2;
    r.path_accuracy = {0.5, 0.75, 0.625, 0.5};
    r.full_accuracy = 0.55;
    r.best_path = 1;
    r.best_accuracy = 0.75;
    const std::string text = render_route_report(r);
    auto back = parse_route_report(text);
    CHECK(back.task_name == "toy");
    CHECK(back.knn_k == 25);
    CHECK(back.path_accuracy == r.path_accuracy);
    CHECK(back.full_accuracy == r.full_accuracy);
    CHECK(back.best_path == 1);
    CHECK(back.groups == 2);
    CHECK(render_route_report(back) == text);

    const std::string log = "step=0 phase=0 target=full loss=-0.5 kd=0.0 collapse=0.2\n"
                            "step=1 phase=0 target=full loss=-0.7 kd=0.0 collapse=0.3\n"
                            "step=2 phase=1 target=1 loss=-0.6 kd=-0.5 collapse=0.25\n";
    auto summary = summarize_metrics(log);
    REQUIRE(summary.phases.size() == 2);
    CHECK(summary.phases[0].steps == 2);
    CHECK(summary.phases[0].mean_loss == doctest::Approx(-0.6));
    CHECK(summary.phases[1].mean_kd == doctest::Approx(-0.5));

    auto rendered = render_report({r, r}, {"a", "b"}, &summary);
    CHECK(rendered.find("== route: a ==") != std::string::npos);
    CHECK(rendered.find("per-path accuracy spread") != std::string::npos);
    CHECK(rendered.find("gain histogram") != std::string::npos);
    CHECK(rendered.find("phase 1") != std::string::npos);
}

TEST_CASE("pipeline: missing artifacts name the producing stage") {
    const std::string dir = temp_dir();
    auto cfg = Config::defaults();
    pipeline::Paths paths{dir};
    try {
        pipeline::route_stage(cfg, paths, dir + "/t.csv", dir + "/e.csv", "t");
        FAIL("expected MissingArtifactError");
    } catch (const MissingArtifactError& e) {
        CHECK(std::string(e.what()).find("gen-data") != std::string::npos);
    }
}

TEST_CASE("pipeline: net checkpoint round trip preserves forward behavior") {
    const std::string dir = temp_dir();
    auto cfg = Config::defaults();
    Rng rng(29);
    NetConfig nc = cfg.net_config();
    SdrNet net(nc, rng);
    pipeline::save_net_checkpoint(dir + "/net.ckpt", net, cfg, "sdr", 10, 2);
    auto loaded = pipeline::load_net_checkpoint(dir + "/net.ckpt");

    Tensor2D x(4, nc.input_dim);
    for (double& v : x.data()) v = rng.normal();
    auto a = net.forward(NetTarget::full(), x, RunMode::train);
    auto b = loaded.forward(NetTarget::full(), x, RunMode::train);
    CHECK(a.projection.data() == b.projection.data());

    // saving the loaded net reproduces the file byte for byte
    pipeline::save_net_checkpoint(dir + "/net2.ckpt", loaded, cfg, "sdr", 10, 2);
    CHECK(read_file(dir + "/net.ckpt") == read_file(dir + "/net2.ckpt"));
}
