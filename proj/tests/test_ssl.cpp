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

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "sdr/ssl.hpp"

using namespace sdr;

namespace {

NetConfig tiny_config(std::size_t g, std::size_t L) {
    NetConfig c;
    c.input_dim = 6;
    c.blocks = L;
    c.groups = g;
    c.shared_width = 4;
    c.individual_width = 4;
    c.proj_dims = {6, 6};
    c.pred_dims = {4, 6};
    return c;
}

Tensor2D random_batch(std::size_t b, std::size_t d, Rng& rng) {
    Tensor2D x(b, d);
    for (double& v : x.data()) v = rng.normal();
    return x;
}

DatasetSplit trivial_split(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < k ? i : rng.uniform_index(k);
    return split_dataset(labels, k);
}

} // namespace

TEST_CASE("augment: zero knobs are the identity; jitter alone scales") {
    Rng rng(1);
    auto x = random_batch(3, 5, rng);

    auto [a1, a2] = augment(x, rng, {});
    CHECK(a1.data() == x.data());
    CHECK(a2.data() == x.data());

    AugmentConfig jitter_only{.scale_jitter = 0.5};
    auto [b1, b2] = augment(x, rng, jitter_only);
    for (std::size_t i = 0; i < 3; ++i) {
        const double r1 = b1(i, 0) / x(i, 0);
        const double r2 = b2(i, 0) / x(i, 0);
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(b1(i, j) == doctest::Approx(r1 * x(i, j)).epsilon(1e-12));
            CHECK(b2(i, j) == doctest::Approx(r2 * x(i, j)).epsilon(1e-12));
        }
        CHECK(r1 >= 0.5);
        CHECK(r1 <= 1.5);
        CHECK(r1 != r2); // independent draws
    }
}

TEST_CASE("augment: empirical view mean matches the input within 3 SE") {
    Rng rng(2);
    Tensor2D x(1, 6);
    for (double& v : x.data()) v = rng.uniform(-2.0, 2.0);
    AugmentConfig cfg{.gaussian_noise_sigma = 0.3, .mask_prob = 0.0, .scale_jitter = 0.4};

    const int n = 10000;
    std::vector<double> sum(6, 0.0), sumsq(6, 0.0);
    for (int t = 0; t < n; ++t) {
        auto [v1, v2] = augment(x, rng, cfg);
        for (std::size_t j = 0; j < 6; ++j) {
            sum[j] += v1(0, j);
            sumsq[j] += v1(0, j) * v1(0, j);
        }
    }
    for (std::size_t j = 0; j < 6; ++j) {
        const double mean = sum[j] / n;
        const double var = sumsq[j] / n - mean * mean;
        const double se = std::sqrt(var / n);
        CHECK(std::abs(mean - x(0, j)) <= 3.0 * se);
    }
}

TEST_CASE("simsiam_loss: alignment, orthogonality, stop-gradient zeros") {
    Rng rng(3);
    auto z1 = random_batch(4, 5, rng), z2 = random_batch(4, 5, rng);

    auto aligned = simsiam_loss(z1, z2, /*p1=*/z2, /*p2=*/z1);
    CHECK(aligned.loss == doctest::Approx(-1.0).epsilon(1e-12));

    Tensor2D ez(2, 2), ep(2, 2);
    ez(0, 0) = 1.0, ez(1, 0) = 1.0;
    ep(0, 1) = 1.0, ep(1, 1) = 1.0; // orthogonal to every z row
    auto ortho = simsiam_loss(ez, ez, ep, ep);
    CHECK(ortho.loss == doctest::Approx(0.0));

    auto p1 = random_batch(4, 5, rng), p2 = random_batch(4, 5, rng);
    auto res = simsiam_loss(z1, z2, p1, p2);
    for (double v : res.d_z1.data()) CHECK(v == 0.0);
    for (double v : res.d_z2.data()) CHECK(v == 0.0);

    // gradient w.r.t. p1: closed form and finite differences
    const std::size_t b = 4;
    for (std::size_t i = 0; i < b; ++i) {
        auto closed = neg_cosine_grad(p1.row(i), z2.row(i));
        for (std::size_t j = 0; j < 5; ++j)
            CHECK(res.d_p1(i, j) == doctest::Approx(0.5 / b * closed[j]).epsilon(1e-9));
    }
    std::vector<double> p1_flat(p1.data());
    auto objective = [&](std::span<const double> flat) {
        Tensor2D pp(4, 5, std::vector<double>(flat.begin(), flat.end()));
        return simsiam_loss(z1, z2, pp, p2).loss;
    };
    auto fd = finite_diff_grad(objective, p1_flat, 1e-6);
    CHECK(sdr::test::grad_rel_err(res.d_p1.data(), fd) <= 1e-6);

    // perturbing a detached input does not move the other view's gradient
    Tensor2D z1_pert = z1;
    z1_pert(0, 0) += 0.37;
    auto res2 = simsiam_loss(z1_pert, z2, p1, p2);
    CHECK(res2.d_p1.data() == res.d_p1.data());
}

TEST_CASE("siamkd_loss: alignment, orthogonality, sub-side-only gradients") {
    Rng rng(5);
    auto zs1 = random_batch(3, 4, rng), zs2 = random_batch(3, 4, rng);
    auto aligned = siamkd_loss(/*sub_p1=*/zs2, /*sub_p2=*/zs1, zs1, zs2);
    CHECK(aligned.loss == doctest::Approx(-1.0).epsilon(1e-12));

    Tensor2D ez(2, 2), ep(2, 2);
    ez(0, 0) = 1.0, ez(1, 0) = 1.0;
    ep(0, 1) = 1.0, ep(1, 1) = 1.0;
    CHECK(siamkd_loss(ep, ep, ez, ez).loss == doctest::Approx(0.0));

    auto p1 = random_batch(3, 4, rng), p2 = random_batch(3, 4, rng);
    auto res = siamkd_loss(p1, p2, zs1, zs2);
    CHECK(res.d_z1.empty()); // nothing reported for the frozen side
    CHECK(res.d_z2.empty());
    // d_p1 pairs with super view 1's counterpart zs2
    auto closed = neg_cosine_grad(p1.row(0), zs2.row(0));
    CHECK(res.d_p1(0, 0) == doctest::Approx(0.5 / 3 * closed[0]).epsilon(1e-9));
}

TEST_CASE("l2_distill_loss: quadratic pull toward frozen projections") {
    Rng rng(7);
    auto z = random_batch(2, 3, rng);
    auto res_same = l2_distill_loss(z, z, z, z);
    CHECK(res_same.loss == doctest::Approx(0.0));

    auto zs1 = random_batch(2, 3, rng), zs2 = random_batch(2, 3, rng);
    auto z1 = random_batch(2, 3, rng), z2 = random_batch(2, 3, rng);
    auto res = l2_distill_loss(z1, z2, zs1, zs2);
    CHECK(res.loss > 0.0);
    CHECK(res.d_z1(0, 0) ==
          doctest::Approx(0.5 / 2 * (z1(0, 0) - zs1(0, 0))).epsilon(1e-12));
}

TEST_CASE("phase_space: growth pattern and monotonicity") {
    auto n0 = phase_space(0, 2, 3);
    REQUIRE(n0.size() == 1);
    CHECK(n0[0].is_full());

    auto n1 = phase_space(1, 2, 3);
    REQUIRE(n1.size() == 3);
    CHECK(n1[1].path_code() == PathCode{{0, 0, 0}});
    CHECK(n1[2].path_code() == PathCode{{0, 0, 1}});

    auto nL = phase_space(4, 4, 4);
    CHECK(nL.size() == 1 + 256);

    for (std::size_t p = 0; p + 1 <= 3; ++p) {
        auto a = phase_space(p, 2, 3);
        auto b = phase_space(p + 1, 2, 3);
        std::set<std::string> bk;
        for (const auto& t : b) bk.insert(t.key(2));
        for (const auto& t : a) CHECK(bk.count(t.key(2)) == 1);
    }

    CHECK_THROWS_AS(phase_space(4, 2, 3), Error);
}

TEST_CASE("collapse_metric: collapsed, basis rows, scale invariance") {
    Tensor2D same(5, 4);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) same(i, j) = 0.3 * (double)j + 1.0;
    CHECK(collapse_metric(same) == doctest::Approx(0.0));

    const std::size_t d = 6;
    Tensor2D basis(d, d);
    for (std::size_t i = 0; i < d; ++i) basis(i, i) = 1.0;
    const double want = std::sqrt((1.0 / d) * (1.0 - 1.0 / d));
    CHECK(collapse_metric(basis) == doctest::Approx(want).epsilon(1e-12));

    Rng rng(9);
    auto f = random_batch(8, 5, rng);
    Tensor2D scaled = f;
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 5; ++j) scaled(i, j) *= (1.0 + (double)i);
    CHECK(collapse_metric(scaled) == doctest::Approx(collapse_metric(f)).epsilon(1e-12));

    CHECK_THROWS_AS(collapse_metric(Tensor2D(1, 4)), Error);
}

TEST_CASE("train_step: zero lr reports losses but moves nothing") {
    auto cfg = tiny_config(2, 2);
    TrainState state(cfg, 11);
    TrainConfig tc;
    tc.sgd = {.learning_rate = 0.0};
    tc.batch_size = 4;
    tc.steps_per_phase = {1, 1, 1};

    Rng rng(13);
    auto batch = random_batch(4, cfg.input_dim, rng);
    std::map<std::string, std::vector<double>> before;
    for (const auto& p : state.net.params()) before[p.name] = p.value.data();

    auto m = train_step(state, NetTarget::path(PathCode{{1, 0}}), batch, tc);
    CHECK(std::isfinite(m.loss));
    CHECK(m.loss != 0.0);
    for (const auto& p : state.net.params()) CHECK(p.value.data() == before[p.name]);
}

TEST_CASE("train_step: parameters outside the stepped view stay bit-identical") {
    auto cfg = tiny_config(2, 2);
    TrainState state(cfg, 17);
    TrainConfig tc;
    tc.sgd = {.learning_rate = 0.05, .momentum = 0.9};
    tc.batch_size = 4;
    tc.steps_per_phase = {1, 1, 1};

    Rng rng(19);
    auto batch = random_batch(4, cfg.input_dim, rng);
    std::map<std::string, std::vector<double>> before;
    for (const auto& p : state.net.params()) before[p.name] = p.value.data();

    auto target = NetTarget::path(PathCode{{0, 1}});
    train_step(state, target, batch, tc);

    const auto inside_names = subnet_param_names(cfg, target.path_code());
    std::set<std::string> inside(inside_names.begin(), inside_names.end());
    for (const auto& p : state.net.params())
        if (!inside.count(p.name)) CHECK(p.value.data() == before[p.name]);
    CHECK(state.net.param("block0.ind1.w").value.data() == before["block0.ind1.w"]);
}

TEST_CASE("train_step: loss decreases over 50 repeated steps on a fixed batch") {
    auto cfg = tiny_config(2, 1);
    TrainState state(cfg, 23);
    TrainConfig tc;
    tc.sgd = {.learning_rate = 0.01, .momentum = 0.9};
    tc.batch_size = 6;
    tc.augment = {}; // identity views keep the objective fixed
    tc.steps_per_phase = {1, 1};

    Rng rng(29);
    auto batch = random_batch(6, cfg.input_dim, rng);
    auto target = NetTarget::path(PathCode{{1}});
    double first = 0.0, last = 0.0;
    for (int s = 0; s < 50; ++s) {
        auto m = train_step(state, target, batch, tc);
        if (s == 0) first = m.loss + m.kd;
        last = m.loss + m.kd;
    }
    CHECK(last < first);
}

TEST_CASE("train_step: lambda 0 equals a hand-built pure consistency update") {
    auto cfg = tiny_config(2, 2);
    TrainState a(cfg, 31), b(cfg, 31);
    TrainConfig tc;
    tc.sgd = {.learning_rate = 0.05};
    tc.batch_size = 4;
    tc.lambda_kd = 0.0;
    tc.steps_per_phase = {1, 1, 1};

    Rng rng(37);
    auto batch = random_batch(4, cfg.input_dim, rng);
    auto target = NetTarget::path(PathCode{{1, 1}});
    auto m = train_step(a, target, batch, tc);
    CHECK(m.kd == 0.0);

    // replay manually on the twin state
    auto [x1, x2] = augment(batch, b.rng, tc.augment);
    ForwardCache c1, c2;
    auto o1 = b.net.forward(target, x1, RunMode::train, nullptr, &c1);
    auto o2 = b.net.forward(target, x2, RunMode::train, nullptr, &c2);
    auto ssl = simsiam_loss(o1.projection, o2.projection, o1.prediction, o2.prediction);
    b.net.zero_grad(target);
    b.net.backward(c1, ssl.d_z1, ssl.d_p1);
    b.net.backward(c2, ssl.d_z2, ssl.d_p2);
    b.sgd.opts = tc.sgd;
    auto view = b.net.subnet_params(target);
    sgd_step(b.sgd, view);

    for (std::size_t i = 0; i < a.net.params().size(); ++i)
        CHECK(a.net.params()[i].value.data() == b.net.params()[i].value.data());
}

TEST_CASE("train: degenerate g=1 runs, budgets honored, bit-identical reruns") {
    auto cfg = tiny_config(1, 1);
    TrainConfig tc;
    tc.sgd = {.learning_rate = 0.02, .momentum = 0.9};
    tc.batch_size = 4;
    tc.augment = {.gaussian_noise_sigma = 0.1, .mask_prob = 0.1, .scale_jitter = 0.1};
    tc.steps_per_phase = {5, 5};

    Rng rng(41);
    auto data = random_batch(30, cfg.input_dim, rng);
    auto splits = trivial_split(30, 1, rng);

    std::size_t steps_seen = 0;
    std::size_t phase_changes = 0;
    std::size_t last_phase = 0;
    auto sink = [&](const StepMetrics& m) {
        ++steps_seen;
        if (m.phase != last_phase) {
            ++phase_changes;
            last_phase = m.phase;
        }
        CHECK((m.target_label == "full" || m.target_label == "0"));
    };
    auto net1 = train(cfg, tc, splits, data, 99, sink);
    CHECK(steps_seen == 10);
    CHECK(phase_changes == 1);

    auto net2 = train(cfg, tc, splits, data, 99, nullptr);
    for (std::size_t i = 0; i < net1.params().size(); ++i)
        CHECK(net1.params()[i].value.data() == net2.params()[i].value.data());

    auto bad = trivial_split(30, 2, rng); // k != g^L
    CHECK_THROWS_AS(train(cfg, tc, bad, data, 99, nullptr), ConfigError);
}

TEST_CASE("metrics line format") {
    StepMetrics m;
    m.step = 12;
    m.phase = 1;
    m.target_label = "3";
    m.loss = -0.5;
    m.kd = -0.25;
    m.collapse = 0.125;
    CHECK(render_metrics_line(m) ==
          "step=12 phase=1 target=3 loss=-0.500000 kd=-0.250000 collapse=0.125000");
}
