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

#include <Eigen/SVD>
#include <cmath>
#include <random>

#include "chanrep/precode.hpp"
#include "test_util.hpp"

using namespace chanrep;
using namespace chanrep::precode;
using chanrep::chanmodel::ChannelTensor;
using chanrep::testutil::random_complex;
using chanrep::testutil::random_unit_precoder;

namespace {

// Independent reference for the single-BS average SE; its own SVD calls and
// summation order, kept apart from the library path it checks.
double task1_reference(const ChannelTensor& ch, const SubcarrierChannels& rep, int n_layers,
                       double noise_var) {
    double acc = 0.0;
    for (int k = 0; k < ch.n_subcarriers(); ++k) {
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(rep[static_cast<std::size_t>(k)],
                                            Eigen::ComputeThinV);
        Eigen::MatrixXcd v = svd.matrixV().leftCols(n_layers);
        v /= v.norm();
        for (int t = 0; t < ch.n_times(); ++t) {
            Eigen::BDCSVD<Eigen::MatrixXcd> prod(ch.at(t, k) * v);
            const double g = prod.singularValues()(0);
            acc += std::log2(1.0 + g * g / noise_var);
        }
    }
    return acc / (static_cast<double>(ch.n_times()) * ch.n_subcarriers());
}

// Exhaustive search over the power simplex (sum p = budget, p >= 0) on a
// regular grid; returns the best objective found.
double waterfill_grid_max(const Eigen::VectorXd& gains, double budget, double step) {
    const int n = static_cast<int>(gains.size());
    double best = -1.0;
    if (n == 1) return waterfill_objective(gains, Eigen::VectorXd::Constant(1, budget));
    const int m = static_cast<int>(budget / step);
    if (n == 2) {
        for (int i = 0; i <= m; ++i) {
            Eigen::VectorXd p(2);
            p << i * step, budget - i * step;
            best = std::max(best, waterfill_objective(gains, p));
        }
    } else if (n == 3) {
        for (int i = 0; i <= m; ++i)
            for (int j = 0; i * step + j * step <= budget; ++j) {
                Eigen::VectorXd p(3);
                p << i * step, j * step, budget - i * step - j * step;
                best = std::max(best, waterfill_objective(gains, p));
            }
    } else {
        REQUIRE(false);
    }
    return best;
}

ChannelTensor random_tensor(std::mt19937_64& rng, int n_t, int n_k, int n_r, int n_tx) {
    ChannelTensor ch(n_t, n_k, n_r, n_tx);
    for (int t = 0; t < n_t; ++t)
        for (int k = 0; k < n_k; ++k) ch.at(t, k) = random_complex(rng, n_r, n_tx);
    return ch;
}

} // namespace

TEST_SUITE("precode") {

TEST_CASE("svd precoder basics") {
    SUBCASE("diagonal channel, one layer") {
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2, 2);
        h(0, 0) = 2.0;
        h(1, 1) = 1.0;
        const Eigen::MatrixXcd w = svd_precoder(h, 1);
        CHECK(w.norm() == doctest::Approx(1.0));
        CHECK((h * w).squaredNorm() == doctest::Approx(4.0));
    }
    SUBCASE("identity channel, two layers") {
        const Eigen::MatrixXcd h = Eigen::MatrixXcd::Identity(2, 2);
        const Eigen::MatrixXcd w = svd_precoder(h, 2);
        CHECK(w.norm() == doctest::Approx(1.0));
        CHECK((h * w).squaredNorm() == doctest::Approx(1.0));
    }
    SUBCASE("dominates random unit-norm precoders") {
        std::mt19937_64 rng(21);
        const Eigen::MatrixXcd h = random_complex(rng, 4, 8);
        const double se_opt = se_single(h, svd_precoder(h, 1), 1.0);
        for (int i = 0; i < 1000; ++i) {
            const double se = se_single(h, random_unit_precoder(rng, 8, 1), 1.0);
            CHECK(se <= se_opt + 1e-12);
        }
    }
    SUBCASE("positive scaling leaves the precoder fixed up to phase") {
        std::mt19937_64 rng(22);
        for (int i = 0; i < 20; ++i) {
            const Eigen::MatrixXcd h = random_complex(rng, 3, 5);
            const Eigen::MatrixXcd w1 = svd_precoder(h, 1);
            const Eigen::MatrixXcd w2 = svd_precoder(3.7 * h, 1);
            CHECK(std::abs((w1.adjoint() * w2)(0, 0)) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("invalid inputs") {
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Ones(2, 2);
        CHECK_THROWS_AS(svd_precoder(h, 3), std::invalid_argument);
        h(0, 0) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(svd_precoder(h, 1), std::invalid_argument);
    }
}

TEST_CASE("single link spectral efficiency") {
    const Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2, 3);
    const Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(3, 1);
    CHECK(se_single(h, w, 1.0) == 0.0);

    Eigen::MatrixXcd h2 = Eigen::MatrixXcd::Zero(1, 1);
    h2(0, 0) = 2.0;
    const Eigen::MatrixXcd w2 = Eigen::MatrixXcd::Identity(1, 1);
    CHECK(se_single(h2, w2, 1.0) == doctest::Approx(std::log2(5.0)));

    SUBCASE("monotone decay toward zero in the noise") {
        std::mt19937_64 rng(23);
        const Eigen::MatrixXcd hr = random_complex(rng, 2, 4);
        const Eigen::MatrixXcd wr = random_unit_precoder(rng, 4, 1);
        double prev = se_single(hr, wr, 1e-3);
        for (double nv : {1e-2, 1e-1, 1.0, 1e1, 1e2, 1e8}) {
            const double cur = se_single(hr, wr, nv);
            CHECK(cur < prev);
            prev = cur;
        }
        CHECK(prev < 1e-6);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(se_single(h, Eigen::MatrixXcd::Zero(2, 1), 1.0), std::invalid_argument);
    }
}

TEST_CASE("task1 matches an independent summation") {
    std::mt19937_64 rng(31);
    const ChannelTensor ch = random_tensor(rng, 2, 3, 2, 4);
    PrecoderSpec spec;
    spec.n_layers = 1;
    spec.noise_var = 0.5;

    SUBCASE("single instant with itself as representative") {
        const ChannelTensor single = random_tensor(rng, 1, 3, 2, 4);
        const SubcarrierChannels rep = slice_rep(single, 0);
        CHECK(task1(single, rep, spec) ==
              doctest::Approx(task1_reference(single, rep, 1, 0.5)).epsilon(1e-12));
    }
    SUBCASE("random two-instant toy against the oracle") {
        const SubcarrierChannels rep = slice_rep(ch, 1);
        CHECK(task1(ch, rep, spec) ==
              doctest::Approx(task1_reference(ch, rep, 1, 0.5)).epsilon(1e-12));
        spec.n_layers = 2;
        CHECK(task1(ch, rep, spec) ==
              doctest::Approx(task1_reference(ch, rep, 2, 0.5)).epsilon(1e-12));
    }
    SUBCASE("own slice upper-bounds foreign representatives when N_t = 1") {
        const ChannelTensor single = random_tensor(rng, 1, 3, 2, 4);
        const double self_score = task1(single, slice_rep(single, 0), spec);
        for (int i = 0; i < 10; ++i) {
            const ChannelTensor other = random_tensor(rng, 1, 3, 2, 4);
            CHECK(task1(single, slice_rep(other, 0), spec) <= self_score + 1e-12);
        }
    }
}

TEST_CASE("dual stacking") {
    std::mt19937_64 rng(41);
    SUBCASE("port counts double") {
        const Eigen::MatrixXcd h1 = random_complex(rng, 4, 32);
        const Eigen::MatrixXcd h2 = random_complex(rng, 4, 32);
        const Eigen::MatrixXcd s = stack_dual(h1, h2);
        CHECK(s.rows() == 4);
        CHECK(s.cols() == 64);
        CHECK((s.leftCols(32) - h1).norm() == 0.0);
        CHECK((s.rightCols(32) - h2).norm() == 0.0);
    }
    SUBCASE("zero second channel keeps the spectrum") {
        const Eigen::MatrixXcd h1 = random_complex(rng, 3, 5);
        const Eigen::MatrixXcd s = stack_dual(h1, Eigen::MatrixXcd::Zero(3, 5));
        Eigen::JacobiSVD<Eigen::MatrixXcd> a(h1), b(s);
        CHECK((a.singularValues() - b.singularValues().head(3)).norm() < 1e-10);
    }
    SUBCASE("duplicated channel scales the top singular value by sqrt(2)") {
        const Eigen::MatrixXcd h1 = random_complex(rng, 3, 5);
        CHECK(spectral_norm(stack_dual(h1, h1)) ==
              doctest::Approx(std::sqrt(2.0) * spectral_norm(h1)).epsilon(1e-10));
    }
    SUBCASE("row mismatch") {
        CHECK_THROWS_AS(stack_dual(Eigen::MatrixXcd::Zero(2, 2), Eigen::MatrixXcd::Zero(3, 2)),
                        std::invalid_argument);
    }
}

TEST_CASE("water-filling closed form") {
    SUBCASE("equal gains split evenly") {
        Eigen::VectorXd c(2);
        c << 1.0, 1.0;
        const PowerAllocation a = waterfill(c, 4.0);
        CHECK(a.p(0) == doctest::Approx(2.0));
        CHECK(a.p(1) == doctest::Approx(2.0));
    }
    SUBCASE("uneven inverse gains, both active") {
        Eigen::VectorXd c(2);
        c << 1.0, 1.0 / 3.0;
        const PowerAllocation a = waterfill(c, 4.0);
        CHECK(a.p(0) == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(a.p(1) == doctest::Approx(1.0).epsilon(1e-12));
        // fine grid search cannot beat it
        CHECK(waterfill_objective(c, a.p) >= waterfill_grid_max(c, 4.0, 1e-3) - 1e-12);
    }
    SUBCASE("weak subcarrier is shut off") {
        Eigen::VectorXd c(2);
        c << 1.0, 0.01;
        const PowerAllocation a = waterfill(c, 4.0);
        CHECK(a.p(0) == doctest::Approx(4.0));
        CHECK(a.p(1) == 0.0);
        CHECK(waterfill_objective(c, a.p) >= waterfill_grid_max(c, 4.0, 1e-3) - 1e-12);
    }
    SUBCASE("zero gains receive nothing; all-zero flags degenerate") {
        Eigen::VectorXd c(3);
        c << 2.0, 0.0, 1.0;
        const PowerAllocation a = waterfill(c, 3.0);
        CHECK(a.p(1) == 0.0);
        CHECK(a.p.sum() == doctest::Approx(3.0));

        const PowerAllocation z = waterfill(Eigen::VectorXd::Zero(2), 3.0);
        CHECK(z.degenerate);
        CHECK(z.p.isZero());
    }
    SUBCASE("kkt conditions at random instances") {
        std::mt19937_64 rng(51);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 1 + static_cast<int>(u(rng) * 8);
            Eigen::VectorXd c(n);
            for (int k = 0; k < n; ++k) c(k) = u(rng) < 0.15 ? 0.0 : 0.01 + 4.0 * u(rng);
            if (c.maxCoeff() == 0.0) c(0) = 1.0;
            const double budget = 0.5 + 10.0 * u(rng);
            const PowerAllocation a = waterfill(c, budget);
            CHECK(a.p.sum() == doctest::Approx(budget).epsilon(1e-12));
            for (int k = 0; k < n; ++k) {
                CHECK(a.p(k) >= 0.0);
                if (c(k) == 0.0) {
                    CHECK(a.p(k) == 0.0);
                } else if (a.p(k) > 0.0) {
                    CHECK(a.p(k) + 1.0 / c(k) == doctest::Approx(a.water_level).epsilon(1e-9));
                } else {
                    CHECK(1.0 / c(k) >= a.water_level - 1e-9);
                }
            }
        }
    }
    SUBCASE("optimality against a simplex grid, three subcarriers") {
        std::mt19937_64 rng(52);
        std::uniform_real_distribution<double> u(0.05, 3.0);
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::VectorXd c(3);
            c << u(rng), u(rng), u(rng);
            const double budget = 6.0;
            const PowerAllocation a = waterfill(c, budget);
            CHECK(waterfill_objective(c, a.p) >=
                  waterfill_grid_max(c, budget, 1e-2) - 1e-12);
        }
    }
}

TEST_CASE("dual precoder construction") {
    std::mt19937_64 rng(61);
    const Eigen::MatrixXcd hs = random_complex(rng, 3, 8);

    SUBCASE("zero power yields the zero vector") {
        CHECK(dual_precoder(hs, 0.0).isZero());
    }
    SUBCASE("unit power yields the unit top right singular vector") {
        const Eigen::VectorXcd w = dual_precoder(hs, 1.0);
        CHECK(w.norm() == doctest::Approx(1.0));
        CHECK((hs * w).norm() == doctest::Approx(spectral_norm(hs)).epsilon(1e-10));
    }
    SUBCASE("achieved rate equals the allocation objective term") {
        const double power = 1.7, noise_var = 0.3;
        const Eigen::VectorXcd w = dual_precoder(hs, power);
        const double lambda = spectral_norm(hs);
        const double achieved = std::log2(1.0 + (hs * w).squaredNorm() / noise_var);
        CHECK(achieved ==
              doctest::Approx(std::log2(1.0 + lambda * lambda * power / noise_var))
                  .epsilon(1e-12));
    }
}

TEST_CASE("joint two-BS score") {
    std::mt19937_64 rng(71);
    const int n_k = 2, n_r = 2, n_tx = 2;
    const ChannelTensor ch1 = random_tensor(rng, 1, n_k, n_r, n_tx);
    const ChannelTensor ch2 = random_tensor(rng, 1, n_k, n_r, n_tx);
    const double noise_var = 0.4;
    const SubcarrierChannels rep = slice_rep_stacked(ch1, ch2, 0);

    SUBCASE("truth as representative achieves the allocation optimum") {
        Eigen::VectorXd gains(n_k);
        for (int k = 0; k < n_k; ++k) {
            const double l = spectral_norm(rep[static_cast<std::size_t>(k)]);
            gains(k) = l * l / noise_var;
        }
        const PowerAllocation alloc = waterfill(gains, 2.0 * n_k);
        const double expected = waterfill_objective(gains, alloc.p) / n_k;
        CHECK(task2(ch1, ch2, rep, noise_var) == doctest::Approx(expected).epsilon(1e-9));
    }

    SUBCASE("grid search over combined powers cannot beat it") {
        const double score = task2(ch1, ch2, rep, noise_var);
        double best = -1.0;
        const double budget = 2.0 * n_k;
        for (double q0 = 0.0; q0 <= budget; q0 += 1e-3) {
            double acc = 0.0;
            const double q[2] = {q0, budget - q0};
            for (int k = 0; k < n_k; ++k) {
                const Eigen::VectorXcd w = dual_precoder(rep[static_cast<std::size_t>(k)], q[k]);
                const Eigen::VectorXcd rx =
                    ch1.at(0, k) * w.head(n_tx) + ch2.at(0, k) * w.tail(n_tx);
                acc += std::log2(1.0 + rx.squaredNorm() / noise_var);
            }
            best = std::max(best, acc / n_k);
        }
        CHECK(score >= best - 1e-12);
        CHECK(score <= best + 1e-3);
    }

    SUBCASE("zeroed representative subcarrier contributes log2(1) = 0") {
        SubcarrierChannels rep0 = rep;
        rep0[1] = Eigen::MatrixXcd::Zero(n_r, 2 * n_tx);
        ChannelTensor c1 = ch1, c2 = ch2;
        const double full = task2(c1, c2, rep0, noise_var);
        // only subcarrier 0 contributes
        Eigen::VectorXd gains(1);
        const double l = spectral_norm(rep0[0]);
        gains(0) = l * l / noise_var;
        // budget still 2 N_k but a single active subcarrier takes it all
        const PowerAllocation alloc = waterfill(gains, 2.0 * n_k);
        const Eigen::VectorXcd w = dual_precoder(rep0[0], alloc.p(0));
        const Eigen::VectorXcd rx = c1.at(0, 0) * w.head(n_tx) + c2.at(0, 0) * w.tail(n_tx);
        const double expected = std::log2(1.0 + rx.squaredNorm() / noise_var) / n_k;
        CHECK(full == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("representative traversal") {
    std::mt19937_64 rng(81);
    PrecoderSpec spec;
    spec.n_layers = 1;
    spec.noise_var = 0.2;

    SUBCASE("single instant picks index zero") {
        const ChannelTensor ch = random_tensor(rng, 1, 2, 2, 3);
        CHECK(representative_traversal_task1(ch, spec).index == 0);
    }
    SUBCASE("ties resolve to the lowest index") {
        ChannelTensor ch(3, 2, 2, 3);
        const Eigen::MatrixXcd h = random_complex(rng, 2, 3);
        for (int t = 0; t < 3; ++t)
            for (int k = 0; k < 2; ++k) ch.at(t, k) = h;
        CHECK(representative_traversal_task1(ch, spec).index == 0);
    }
    SUBCASE("matches exhaustive evaluation") {
        const ChannelTensor ch = random_tensor(rng, 4, 3, 2, 4);
        const TraversalResult res = representative_traversal_task1(ch, spec);
        int best_t = 0;
        double best = -1.0;
        for (int t = 0; t < 4; ++t) {
            const double score = task1_reference(ch, slice_rep(ch, t), 1, 0.2);
            if (score > best) {
                best = score;
                best_t = t;
            }
        }
        CHECK(res.index == best_t);
        CHECK(task1(ch, res.rep, spec) == doctest::Approx(best).epsilon(1e-12));
        CHECK(task1(ch, res.rep, spec) >=
              task1(ch, slice_rep(ch, (best_t + 1) % 4), spec) - 1e-12);
    }
    SUBCASE("joint variant matches exhaustive evaluation") {
        const ChannelTensor c1 = random_tensor(rng, 3, 2, 2, 3);
        const ChannelTensor c2 = random_tensor(rng, 3, 2, 2, 3);
        const TraversalResult res = representative_traversal_task2(c1, c2, 0.2);
        int best_t = 0;
        double best = -1.0;
        for (int t = 0; t < 3; ++t) {
            const double s = task2(c1, c2, slice_rep_stacked(c1, c2, t), 0.2);
            if (s > best) {
                best = s;
                best_t = t;
            }
        }
        CHECK(res.index == best_t);
    }
}

TEST_CASE("nmse") {
    using chanmodel::Dataset;
    using chanmodel::DatasetEntry;
    std::mt19937_64 rng(91);

    Dataset ds;
    ds.scene.n_subcarriers = 2;
    ds.scene.n_times = 2;
    for (int i = 0; i < 3; ++i) {
        DatasetEntry e;
        e.bs_id = 0;
        e.ue_id = i;
        e.channel = random_tensor(rng, 2, 2, 2, 3);
        ds.entries.push_back(std::move(e));
    }

    SUBCASE("exact reconstruction is floored") {
        CHECK(nmse_db(ds, ds) == -300.0);
    }
    SUBCASE("zero reconstruction scores 0 dB") {
        Dataset zero = ds;
        for (auto& e : zero.entries)
            for (int t = 0; t < 2; ++t)
                for (int k = 0; k < 2; ++k) e.channel.at(t, k).setZero();
        CHECK(nmse_db(ds, zero) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("invariant under a shared complex scaling, asymmetric in arguments") {
        Dataset recon = ds;
        for (auto& e : recon.entries)
            for (int t = 0; t < 2; ++t)
                for (int k = 0; k < 2; ++k)
                    e.channel.at(t, k) += 0.25 * random_complex(rng, 2, 3);

        const double base = nmse_db(ds, recon);
        Dataset ds_s = ds, recon_s = recon;
        const std::complex<double> scale(0.3, -1.1);
        for (auto* d : {&ds_s, &recon_s})
            for (auto& e : d->entries)
                for (int t = 0; t < 2; ++t)
                    for (int k = 0; k < 2; ++k) e.channel.at(t, k) *= scale;
        CHECK(nmse_db(ds_s, recon_s) == doctest::Approx(base).epsilon(1e-12));
        CHECK(nmse_db(ds, recon) != nmse_db(recon, ds));
    }
    SUBCASE("zero-norm channel is rejected") {
        Dataset zero = ds;
        for (int t = 0; t < 2; ++t)
            for (int k = 0; k < 2; ++k) zero.entries[0].channel.at(t, k).setZero();
        CHECK_THROWS_AS(nmse_db(zero, ds), std::invalid_argument);
    }
}

TEST_CASE("joint rate identity on random instances") {
    // Reduced-size version of the acceptance identity: achieved joint SE at
    // the water-filled allocation equals the allocation objective.
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> d_nr(1, 4), d_nt(1, 8), d_nk(1, 8);
    std::uniform_real_distribution<double> d_nv(0.05, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n_r = d_nr(rng), n_tx = d_nt(rng), n_k = d_nk(rng);
        const double noise_var = d_nv(rng);
        const ChannelTensor c1 = random_tensor(rng, 1, n_k, n_r, n_tx);
        const ChannelTensor c2 = random_tensor(rng, 1, n_k, n_r, n_tx);
        const SubcarrierChannels rep = slice_rep_stacked(c1, c2, 0);

        Eigen::VectorXd gains(n_k);
        for (int k = 0; k < n_k; ++k) {
            const double l = spectral_norm(rep[static_cast<std::size_t>(k)]);
            gains(k) = l * l / noise_var;
        }
        const PowerAllocation alloc = waterfill(gains, 2.0 * n_k);
        const double achieved = task2(c1, c2, rep, noise_var) * n_k;
        const double objective = waterfill_objective(gains, alloc.p);
        CHECK(std::abs(achieved - objective) <=
              1e-9 * std::max(1.0, std::abs(objective)));
    }
}

} // TEST_SUITE
