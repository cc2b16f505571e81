// SPDX-License-Identifier: Apache-2.0
//
// chanrep - MIMO-OFDM channel representation and geolocation-based precoding
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "chanrep/latentgen.hpp"
#include "chanrep/nn/gradcheck.hpp"
#include "test_util.hpp"

using namespace chanrep;
using namespace chanrep::latentgen;
using replearn::Representation;

namespace {

nn::NoiseNetConfig tiny_net_cfg() {
    nn::NoiseNetConfig cfg;
    cfg.n_re = 8;
    cfg.base_width = 4;
    cfg.n_heads = 2;
    cfg.cond_dim = 8;
    return cfg;
}

Eigen::RowVectorXd random_row(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::RowVectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = g(rng);
    return v;
}

} // namespace

TEST_SUITE("latentgen") {

TEST_CASE("schedule tables") {
    SUBCASE("full-scale linear formula endpoints") {
        const DiffusionSchedule s = make_schedule(600, 1e-4, 1.65e-5);
        CHECK(s.delta_at(1) == doctest::Approx(1.165e-4).epsilon(1e-12));
        CHECK(s.delta_at(600) == doctest::Approx(1.0e-2).epsilon(1e-12));
        CHECK(s.delta_tilde_at(1) == 0.0);
    }
    SUBCASE("identities over the full table") {
        const DiffusionSchedule s = make_schedule(600, 1e-4, 1.65e-5);
        double prod = 1.0;
        for (int step = 1; step <= 600; ++step) {
            prod *= s.alpha_at(step);
            CHECK(std::abs(s.alpha_bar_at(step) - prod) <= 1e-12 * std::abs(prod));
            const double expected = (1.0 - s.alpha_bar_at(step - 1)) /
                                    (1.0 - s.alpha_bar_at(step)) * s.delta_at(step);
            CHECK(std::abs(s.delta_tilde_at(step) - expected) <= 1e-12);
        }
        // strictly decreasing accumulations
        for (int step = 2; step <= 600; ++step)
            CHECK(s.alpha_bar_at(step) < s.alpha_bar_at(step - 1));
    }
    SUBCASE("deltas outside the unit interval are rejected") {
        CHECK_THROWS_AS(make_schedule(100, 0.5, 6e-3), std::invalid_argument);
        CHECK_THROWS_AS(make_schedule(10, -1e-3, 1e-5), std::invalid_argument);
    }
}

TEST_CASE("forward corruption") {
    const DiffusionSchedule s = make_schedule(100, 1e-4, 6e-4);
    std::mt19937_64 rng(3);
    const Eigen::RowVectorXd f0 = random_row(rng, 8);

    SUBCASE("zero noise leaves the scaled signal") {
        const Eigen::RowVectorXd out = forward_sample(f0, 7, Eigen::RowVectorXd::Zero(8), s);
        CHECK((out - std::sqrt(s.alpha_bar_at(7)) * f0).norm() < 1e-14);
    }
    SUBCASE("terminal step of a destructive schedule is almost pure noise") {
        const DiffusionSchedule hard = make_schedule(200, 1e-4, 2e-3);
        CHECK(hard.alpha_bar_at(200) < 1e-10);
        const Eigen::RowVectorXd z = random_row(rng, 8);
        const Eigen::RowVectorXd out = forward_sample(f0, 200, z, hard);
        CHECK((out - z).norm() < 1e-4 * z.norm());
    }
    SUBCASE("marginal second moment matches the closed form within one percent") {
        const int s_probe = 60, dim = 8, n_draws = 100000;
        const double ab = s.alpha_bar_at(s_probe);
        double acc = 0.0;
        for (int i = 0; i < n_draws; ++i)
            acc += forward_sample(f0, s_probe, random_row(rng, dim), s).squaredNorm();
        const double expected = ab * f0.squaredNorm() + (1.0 - ab) * dim;
        CHECK(acc / n_draws == doctest::Approx(expected).epsilon(0.01));
    }
    SUBCASE("per-step kernel composition matches the closed form in mean and variance") {
        // compose Gaussian steps s' = 1..s and compare with the one-shot form
        const int s_probe = 9, dim = 4, n_draws = 100000;
        std::mt19937_64 r2(4);
        const Eigen::RowVectorXd base = random_row(r2, dim);
        double acc_sq = 0.0;
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(dim);
        for (int i = 0; i < n_draws; ++i) {
            Eigen::RowVectorXd f = base;
            for (int step = 1; step <= s_probe; ++step)
                f = std::sqrt(1.0 - s.delta_at(step)) * f +
                    std::sqrt(s.delta_at(step)) * random_row(r2, dim);
            acc += f;
            acc_sq += f.squaredNorm();
        }
        const double ab = s.alpha_bar_at(s_probe);
        const Eigen::RowVectorXd mean = acc / n_draws;
        CHECK((mean - std::sqrt(ab) * base).norm() < 0.01 * base.norm());
        const double expected_sq = ab * base.squaredNorm() + (1.0 - ab) * dim;
        CHECK(acc_sq / n_draws == doctest::Approx(expected_sq).epsilon(0.01));
    }
    SUBCASE("step range is enforced") {
        CHECK_THROWS_AS(forward_sample(f0, 0, f0, s), std::out_of_range);
        CHECK_THROWS_AS(forward_sample(f0, 101, f0, s), std::out_of_range);
    }
}

TEST_CASE("posterior mean closed forms") {
    const DiffusionSchedule s = make_schedule(80, 1e-4, 8e-4);
    std::mt19937_64 rng(5);

    SUBCASE("the x0 and noise forms agree on the true forward noise") {
        for (int trial = 0; trial < 50; ++trial) {
            const Eigen::RowVectorXd f0 = random_row(rng, 8);
            const Eigen::RowVectorXd z = random_row(rng, 8);
            const int step = 1 + static_cast<int>(trial * 79.0 / 49.0);
            const Eigen::RowVectorXd fs = forward_sample(f0, step, z, s);
            const Eigen::RowVectorXd a = posterior_mean_from_x0(fs, f0, step, s);
            const Eigen::RowVectorXd b = posterior_mean_from_noise(fs, z, step, s);
            CHECK((a - b).norm() <= 1e-10 * std::max(1.0, a.norm()));
        }
    }
    SUBCASE("step one with the true noise collapses to the clean signal") {
        const Eigen::RowVectorXd f0 = random_row(rng, 6);
        const Eigen::RowVectorXd z = random_row(rng, 6);
        const Eigen::RowVectorXd f1 = forward_sample(f0, 1, z, s);
        CHECK((posterior_mean_from_noise(f1, z, 1, s) - f0).norm() < 1e-12);
        CHECK((posterior_mean_from_x0(f1, f0, 1, s) - f0).norm() < 1e-12);
    }
    SUBCASE("zero inputs give zero") {
        const Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(4);
        CHECK(posterior_mean_from_noise(z, z, 5, s).norm() == 0.0);
    }
    SUBCASE("step zero is rejected") {
        const Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(4);
        CHECK_THROWS_AS(posterior_mean_from_noise(z, z, 0, s), std::out_of_range);
    }
}

TEST_CASE("generator training") {
    nn::NoiseNetModel net = nn::NoiseNetModel::create(tiny_net_cfg(), 61);
    std::mt19937_64 rng(6);

    // two-component Gaussian mixture in latent space, conditioned on location
    std::vector<Representation> reps;
    std::vector<Eigen::Vector3d> locs;
    for (int i = 0; i < 64; ++i) {
        Representation r;
        const bool left = i % 2 == 0;
        r.f = Eigen::VectorXd::Constant(8, left ? -2.0 : 2.0) +
              random_row(rng, 8, 0.3).transpose();
        reps.push_back(r);
        locs.emplace_back(left ? -10.0 : 10.0, 0.0, 1.5);
    }

    GeneratorConfig cfg;
    cfg.n_steps = 20;
    cfg.delta_slope = 8e-3; // destructive enough for a 20-step toy chain
    cfg.batch_size = 8;
    cfg.steps = 400;
    cfg.learning_rate = 3e-3;
    cfg.seed = 62;

    SUBCASE("initial loss sits near the latent dimension") {
        GeneratorConfig probe = cfg;
        probe.steps = 5;
        probe.learning_rate = 1e-12; // hold the zero-initialized output stage
        nn::NoiseNetModel fresh = nn::NoiseNetModel::create(tiny_net_cfg(), 63);
        const auto r = train_generator(reps, locs, fresh, probe);
        double acc = 0.0;
        for (const auto& rec : r.log) acc += rec.loss;
        CHECK(acc / static_cast<double>(r.log.size()) ==
              doctest::Approx(8.0).epsilon(0.25));
    }

    SUBCASE("loss decreases and fixed seeds reproduce the log") {
        nn::NoiseNetModel a = nn::NoiseNetModel::create(tiny_net_cfg(), 64);
        const auto ra = train_generator(reps, locs, a, cfg);
        REQUIRE(ra.log.size() == 400);
        auto avg = [&](std::size_t from, std::size_t to) {
            double acc = 0.0;
            for (std::size_t i = from; i < to; ++i) acc += ra.log[i].loss;
            return acc / static_cast<double>(to - from);
        };
        CHECK(avg(300, 400) < 0.7 * avg(0, 50));

        nn::NoiseNetModel b = nn::NoiseNetModel::create(tiny_net_cfg(), 64);
        const auto rb = train_generator(reps, locs, b, cfg);
        for (std::size_t i = 0; i < ra.log.size(); ++i)
            CHECK(ra.log[i].loss == rb.log[i].loss);

        SUBCASE("sampled moments land near the conditional component") {
            const DiffusionSchedule sched = cfg.schedule();
            const Mat right = sample(Eigen::Vector3d(10.0, 0.0, 1.5), 400, a, sched, 99);
            const double m = right.mean();
            CHECK(m == doctest::Approx(2.0).epsilon(0.10));
            const Mat left = sample(Eigen::Vector3d(-10.0, 0.0, 1.5), 400, a, sched, 99);
            CHECK(left.mean() == doctest::Approx(-2.0).epsilon(0.10));
        }
    }
}

TEST_CASE("ancestral sampling mechanics") {
    nn::NoiseNetModel net = nn::NoiseNetModel::create(tiny_net_cfg(), 71);
    const DiffusionSchedule sched = make_schedule(10, 1e-3, 5e-3);
    const Eigen::Vector3d loc(1.0, 2.0, 1.5);

    SUBCASE("same seed, same draws; prefixes are shared across n") {
        const Mat a = sample(loc, 2, net, sched, 7);
        const Mat b = sample(loc, 2, net, sched, 7);
        CHECK((a - b).norm() == 0.0);
        const Mat one = sample(loc, 1, net, sched, 7);
        const Mat ten = sample(loc, 10, net, sched, 7);
        CHECK((one.row(0) - ten.row(0)).norm() == 0.0);
        CHECK((a.row(0) - a.row(1)).norm() > 0.0);
    }

    SUBCASE("zero network keeps the sample mean near zero") {
        // fresh net: zero-initialized output stage predicts zero noise, so the
        // chain is a linear map of Gaussians with zero mean
        double acc = 0.0;
        const int n = 10000;
        const Mat draws = sample(loc, n, net, sched, 8);
        for (int i = 0; i < n; ++i) acc += draws.row(i).mean();
        // per-coordinate variance after the chain stays O(1); the mean of
        // n * dim standardized coordinates concentrates around zero
        CHECK(std::abs(acc / n) < 0.02);
    }
}

TEST_CASE("latent dump round trip") {
    std::mt19937_64 rng(81);
    Mat lat(3, 8);
    for (int i = 0; i < 3; ++i) lat.row(i) = random_row(rng, 8);
    const auto dir = std::filesystem::temp_directory_path() / "chanrep_tests";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "latents.lat1").string();
    save_latents(lat, Eigen::Vector3d(1, 2, 3), 42, path);
    const Mat back = load_latents(path);
    REQUIRE(back.rows() == 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 8; ++j)
            CHECK(back(i, j) == static_cast<double>(static_cast<float>(lat(i, j))));
}

TEST_CASE("best-of-n representative selection") {
    // drive selection with an untrained decoder; scores differ across samples
    nn::NoiseNetModel net = nn::NoiseNetModel::create(tiny_net_cfg(), 91);
    const DiffusionSchedule sched = make_schedule(10, 1e-3, 5e-3);

    nn::DecoderConfig dc;
    dc.n_re = 8;
    dc.d_model = 16;
    dc.n_heads = 2;
    dc.depth = 1;
    dc.mlp_ratio = 2;
    dc.n_k = 4;
    dc.n_antenna = 8;
    nn::DecoderModel dec = nn::DecoderModel::create(dc, 92);
    std::mt19937_64 rng(93);
    nn::randomize_params(dec.params, rng, 0.3);

    chanmodel::SceneConfig scene;
    scene.n_subcarriers = 4;
    scene.n_times = 2;
    scene.rng_seed = 94;
    scene.geometry.n_x = 2;
    scene.geometry.n_y = 2;
    scene.geometry.n_z = 1;
    scene.geometry.n_r = 2;
    chanmodel::SceneSamplerConfig sampler;
    sampler.n_paths = 2;
    const chanmodel::Dataset ds = chanmodel::build_dataset(scene, sampler, 2, 2);

    precode::PrecoderSpec spec;
    spec.n_layers = 1;
    spec.noise_var = 0.1;
    const Eigen::Vector3d loc = ds.entries[0].channel.loc;

    SUBCASE("single generation returns that sample's decode") {
        const auto one = generate_representative(loc, 1, net, sched, dec, ds.norm_scale,
                                                 ds.entries[0].channel, spec, 17);
        CHECK(one.index == 0);
        const Mat lat = sample(loc, 1, net, sched, 17);
        const auto rep = replearn::image_to_channel(dec.decode(lat.row(0)), 2, 4,
                                                    ds.norm_scale);
        CHECK(one.score ==
              doctest::Approx(precode::task1(ds.entries[0].channel, rep, spec))
                  .epsilon(1e-12));
    }

    SUBCASE("ten generations never score below one under a shared seed") {
        const auto one = generate_representative(loc, 1, net, sched, dec, ds.norm_scale,
                                                 ds.entries[0].channel, spec, 18);
        const auto ten = generate_representative(loc, 10, net, sched, dec, ds.norm_scale,
                                                 ds.entries[0].channel, spec, 18);
        CHECK(ten.score >= one.score);
    }

    SUBCASE("joint variant scores the stacked pair") {
        const auto res = generate_representative_dual(
            ds.entries[0].channel.loc, ds.entries[1].channel.loc, 3, net, sched, dec,
            ds.norm_scale, ds.entries[0].channel, ds.entries[1].channel, 0.1, 19);
        CHECK(res.rep.size() == 4);
        CHECK(res.rep[0].cols() == 8); // 2 N_T
        CHECK(std::isfinite(res.score));
    }
}

} // TEST_SUITE
