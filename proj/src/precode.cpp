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

#include "chanrep/precode.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace chanrep::precode {

void PrecoderSpec::validate(int n_rx, int n_tx) const {
    if (n_layers < 1 || n_layers > std::min(n_rx, n_tx))
        throw std::invalid_argument("PrecoderSpec: n_layers must be in [1, min(N_R, N_T)]");
    if (!(noise_var > 0.0))
        throw std::invalid_argument("PrecoderSpec: noise variance must be positive");
}

double spectral_norm(const Eigen::MatrixXcd& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
    return svd.singularValues()(0);
}

Eigen::MatrixXcd svd_precoder(const Eigen::MatrixXcd& h, int n_layers) {
    if (!h.allFinite()) throw std::invalid_argument("svd_precoder: non-finite channel");
    if (n_layers < 1 || n_layers > std::min(h.rows(), h.cols()))
        throw std::invalid_argument("svd_precoder: invalid layer count");
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h, Eigen::ComputeThinV);
    Eigen::MatrixXcd w = svd.matrixV().leftCols(n_layers);
    const double norm = w.norm();
    if (!(norm > 0.0)) throw std::runtime_error("svd_precoder: degenerate singular vectors");
    return w / norm;
}

double se_single(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& w, double noise_var) {
    if (h.cols() != w.rows()) throw std::invalid_argument("se_single: shape mismatch");
    if (!(noise_var > 0.0)) throw std::invalid_argument("se_single: noise variance must be > 0");
    const double gain = spectral_norm(h * w);
    return std::log2(1.0 + gain * gain / noise_var);
}

double task1(const ChannelTensor& channels, const SubcarrierChannels& rep,
             const PrecoderSpec& spec) {
    if (static_cast<int>(rep.size()) != channels.n_subcarriers())
        throw std::invalid_argument("task1: representative must cover every subcarrier");
    spec.validate(channels.n_rx(), channels.n_tx());

    std::vector<Eigen::MatrixXcd> precoders(rep.size());
    for (std::size_t k = 0; k < rep.size(); ++k) {
        if (rep[k].rows() != channels.n_rx() || rep[k].cols() != channels.n_tx())
            throw std::invalid_argument("task1: representative shape mismatch");
        precoders[k] = svd_precoder(rep[k], spec.n_layers);
    }

    double acc = 0.0;
    for (int t = 0; t < channels.n_times(); ++t)
        for (int k = 0; k < channels.n_subcarriers(); ++k)
            acc += se_single(channels.at(t, k), precoders[static_cast<std::size_t>(k)],
                             spec.noise_var);
    return acc / (static_cast<double>(channels.n_times()) * channels.n_subcarriers());
}

Eigen::MatrixXcd stack_dual(const Eigen::MatrixXcd& h1, const Eigen::MatrixXcd& h2) {
    if (h1.rows() != h2.rows()) throw std::invalid_argument("stack_dual: row count mismatch");
    Eigen::MatrixXcd out(h1.rows(), h1.cols() + h2.cols());
    out << h1, h2;
    return out;
}

PowerAllocation waterfill(const Eigen::VectorXd& gains, double budget) {
    const Eigen::Index n = gains.size();
    if (n == 0) throw std::invalid_argument("waterfill: empty gain vector");
    if (!(budget > 0.0)) throw std::invalid_argument("waterfill: budget must be positive");
    for (Eigen::Index k = 0; k < n; ++k)
        if (!(gains(k) >= 0.0) || !std::isfinite(gains(k)))
            throw std::invalid_argument("waterfill: gains must be finite and >= 0");

    PowerAllocation out;
    out.p = Eigen::VectorXd::Zero(n);

    std::vector<Eigen::Index> active;
    for (Eigen::Index k = 0; k < n; ++k)
        if (gains(k) > 0.0) active.push_back(k);
    if (active.empty()) {
        out.degenerate = true;
        return out;
    }

    // Sort inverse gains ascending; the best m subcarriers are filled when the
    // implied water level exceeds the m-th inverse gain.
    std::sort(active.begin(), active.end(),
              [&](Eigen::Index a, Eigen::Index b) { return gains(a) > gains(b); });
    std::vector<double> inv(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) inv[i] = 1.0 / gains(active[i]);

    double prefix = 0.0;
    double level = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
        prefix += inv[i];
        const double candidate = (budget + prefix) / static_cast<double>(i + 1);
        if (candidate > inv[i]) {
            level = candidate;
            m = i + 1;
        } else {
            break;
        }
    }

    out.water_level = level;
    for (std::size_t i = 0; i < m; ++i) out.p(active[i]) = level - inv[i];
    return out;
}

Eigen::VectorXcd dual_precoder(const Eigen::MatrixXcd& h_stacked, double power) {
    if (!(power >= 0.0)) throw std::invalid_argument("dual_precoder: power must be >= 0");
    if (power == 0.0) return Eigen::VectorXcd::Zero(h_stacked.cols());
    if (!h_stacked.allFinite()) throw std::invalid_argument("dual_precoder: non-finite channel");
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h_stacked, Eigen::ComputeThinV);
    return std::sqrt(power) * svd.matrixV().col(0);
}

double waterfill_objective(const Eigen::VectorXd& gains, const Eigen::VectorXd& p) {
    if (gains.size() != p.size()) throw std::invalid_argument("waterfill_objective: size mismatch");
    double acc = 0.0;
    for (Eigen::Index k = 0; k < gains.size(); ++k) acc += std::log2(1.0 + gains(k) * p(k));
    return acc;
}

double task2(const ChannelTensor& ch1, const ChannelTensor& ch2,
             const SubcarrierChannels& rep_stacked, double noise_var) {
    if (ch1.n_times() != ch2.n_times() || ch1.n_subcarriers() != ch2.n_subcarriers() ||
        ch1.n_rx() != ch2.n_rx() || ch1.n_tx() != ch2.n_tx())
        throw std::invalid_argument("task2: tensors must share one shape");
    const int n_k = ch1.n_subcarriers();
    const int n_tx = ch1.n_tx();
    if (static_cast<int>(rep_stacked.size()) != n_k)
        throw std::invalid_argument("task2: representative must cover every subcarrier");
    if (!(noise_var > 0.0)) throw std::invalid_argument("task2: noise variance must be > 0");

    Eigen::VectorXd gains(n_k);
    for (int k = 0; k < n_k; ++k) {
        if (rep_stacked[k].rows() != ch1.n_rx() || rep_stacked[k].cols() != 2 * n_tx)
            throw std::invalid_argument("task2: stacked representative shape mismatch");
        const double top = spectral_norm(rep_stacked[k]);
        gains(k) = top * top / noise_var;
    }
    const PowerAllocation alloc = waterfill(gains, 2.0 * n_k);

    std::vector<Eigen::VectorXcd> u1(n_k), u2(n_k);
    for (int k = 0; k < n_k; ++k) {
        const Eigen::VectorXcd w = dual_precoder(rep_stacked[k], alloc.p(k));
        u1[k] = w.head(n_tx);
        u2[k] = w.tail(n_tx);
    }

    double acc = 0.0;
    for (int t = 0; t < ch1.n_times(); ++t)
        for (int k = 0; k < n_k; ++k) {
            const Eigen::VectorXcd rx = ch1.at(t, k) * u1[k] + ch2.at(t, k) * u2[k];
            acc += std::log2(1.0 + rx.squaredNorm() / noise_var);
        }
    return acc / (static_cast<double>(ch1.n_times()) * n_k);
}

SubcarrierChannels slice_rep(const ChannelTensor& channels, int t) {
    SubcarrierChannels out(channels.n_subcarriers());
    for (int k = 0; k < channels.n_subcarriers(); ++k) out[k] = channels.at(t, k);
    return out;
}

SubcarrierChannels slice_rep_stacked(const ChannelTensor& ch1, const ChannelTensor& ch2, int t) {
    if (ch1.n_subcarriers() != ch2.n_subcarriers() || ch1.n_rx() != ch2.n_rx())
        throw std::invalid_argument("slice_rep_stacked: shape mismatch");
    SubcarrierChannels out(ch1.n_subcarriers());
    for (int k = 0; k < ch1.n_subcarriers(); ++k) out[k] = stack_dual(ch1.at(t, k), ch2.at(t, k));
    return out;
}

TraversalResult representative_traversal_task1(const ChannelTensor& channels,
                                               const PrecoderSpec& spec) {
    TraversalResult best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < channels.n_times(); ++t) {
        SubcarrierChannels rep = slice_rep(channels, t);
        const double score = task1(channels, rep, spec);
        if (score > best_score) {
            best_score = score;
            best.index = t;
            best.rep = std::move(rep);
        }
    }
    return best;
}

TraversalResult representative_traversal_task2(const ChannelTensor& ch1,
                                               const ChannelTensor& ch2, double noise_var) {
    TraversalResult best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < ch1.n_times(); ++t) {
        SubcarrierChannels rep = slice_rep_stacked(ch1, ch2, t);
        const double score = task2(ch1, ch2, rep, noise_var);
        if (score > best_score) {
            best_score = score;
            best.index = t;
            best.rep = std::move(rep);
        }
    }
    return best;
}

double nmse_fraction(const ChannelTensor& h, const ChannelTensor& h_hat) {
    if (h.n_times() != h_hat.n_times() || h.n_subcarriers() != h_hat.n_subcarriers() ||
        h.n_rx() != h_hat.n_rx() || h.n_tx() != h_hat.n_tx())
        throw std::invalid_argument("nmse: shape mismatch");
    double acc = 0.0;
    for (int t = 0; t < h.n_times(); ++t) {
        double err = 0.0;
        const double sig = h.slice_squared_norm(t);
        if (!(sig > 0.0)) throw std::invalid_argument("nmse: zero-norm channel");
        for (int k = 0; k < h.n_subcarriers(); ++k)
            err += (h.at(t, k) - h_hat.at(t, k)).squaredNorm();
        acc += err / sig;
    }
    return acc / h.n_times();
}

double nmse_db(const chanmodel::Dataset& ds, const chanmodel::Dataset& recon) {
    if (ds.entries.size() != recon.entries.size())
        throw std::invalid_argument("nmse: datasets differ in entry count");
    if (ds.entries.empty()) throw std::invalid_argument("nmse: empty dataset");

    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < ds.entries.size(); ++i) {
        const ChannelTensor& h = ds.entries[i].channel;
        const ChannelTensor& r = recon.entries[i].channel;
        acc += nmse_fraction(h, r) * h.n_times();
        count += static_cast<std::size_t>(h.n_times());
    }
    const double mean = acc / static_cast<double>(count);
    if (mean <= 0.0) return -300.0;
    return std::max(-300.0, 10.0 * std::log10(mean));
}

} // namespace chanrep::precode
