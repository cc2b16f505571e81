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

#ifndef CHANREP_PRECODE_HPP
#define CHANREP_PRECODE_HPP

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "chanrep/chanmodel.hpp"

namespace chanrep::precode {

using chanmodel::ChannelTensor;

struct PrecoderSpec {
    int n_layers = 1;
    double noise_var = 0.1;
    void validate(int n_rx, int n_tx) const;
};

// One N_R x N_T (or N_R x 2N_T when stacked) matrix per subcarrier; the
// time-invariant representative channel a precoder is derived from.
using SubcarrierChannels = std::vector<Eigen::MatrixXcd>;

// Largest singular value.
double spectral_norm(const Eigen::MatrixXcd& a);

// First n_layers right singular vectors of H, Frobenius-normalized to 1.
Eigen::MatrixXcd svd_precoder(const Eigen::MatrixXcd& h, int n_layers);

// log2(1 + ||H W||_2^2 / noise_var) with the squared spectral norm of the
// product.
double se_single(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& w, double noise_var);

// Average spectral efficiency over (t, k) of the fixed per-subcarrier SVD
// precoders of `rep` applied to the actual channels.
double task1(const ChannelTensor& channels, const SubcarrierChannels& rep,
             const PrecoderSpec& spec);

// Horizontal concatenation [H1, H2].
Eigen::MatrixXcd stack_dual(const Eigen::MatrixXcd& h1, const Eigen::MatrixXcd& h2);

// Water-filling over per-subcarrier gains c_k: p_k = max(0, mu - 1/c_k) with
// the water level mu chosen exactly (sort-based) so that sum p_k = budget.
// Subcarriers with c_k = 0 receive nothing. All-zero gains yield the zero
// allocation with `degenerate` set.
struct PowerAllocation {
    Eigen::VectorXd p;
    double water_level = 0.0;
    bool degenerate = false;
};

PowerAllocation waterfill(const Eigen::VectorXd& gains, double budget);

// Top right singular vector of the stacked channel scaled to squared norm
// `power`; the top/bottom halves are the per-BS precoders.
Eigen::VectorXcd dual_precoder(const Eigen::MatrixXcd& h_stacked, double power);

// Joint two-BS score: per-subcarrier dual precoders are derived from the
// stacked representative via water-filling (budget 2 N_k) over its top
// singular values, then log2(1 + ||H1 u1 + H2 u2||^2 / noise_var) is averaged
// over (t, k).
double task2(const ChannelTensor& ch1, const ChannelTensor& ch2,
             const SubcarrierChannels& rep_stacked, double noise_var);

// Objective of the separable power-allocation problem the water-filler
// solves: sum_k log2(1 + c_k p_k).
double waterfill_objective(const Eigen::VectorXd& gains, const Eigen::VectorXd& p);

struct TraversalResult {
    int index = 0;
    SubcarrierChannels rep;
};

// Best observed time slice used as representative; exhaustive argmax over t,
// ties resolved toward the lowest index.
TraversalResult representative_traversal_task1(const ChannelTensor& channels,
                                               const PrecoderSpec& spec);
TraversalResult representative_traversal_task2(const ChannelTensor& ch1,
                                               const ChannelTensor& ch2, double noise_var);

// Time slice t of a tensor as per-subcarrier matrices.
SubcarrierChannels slice_rep(const ChannelTensor& channels, int t);
SubcarrierChannels slice_rep_stacked(const ChannelTensor& ch1, const ChannelTensor& ch2, int t);

// 10 log10 of the mean over (entry, t) of ||H - H_hat||^2 / ||H||^2 with the
// norms taken over the flattened (k, r, tx) slice. Exact reconstruction is
// floored at -300 dB.
double nmse_db(const chanmodel::Dataset& ds, const chanmodel::Dataset& recon);
double nmse_fraction(const ChannelTensor& h, const ChannelTensor& h_hat); // linear, pre-log

} // namespace chanrep::precode

#endif
