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

#ifndef CHANREP_NN_MODELS_HPP
#define CHANREP_NN_MODELS_HPP

#include <cstdint>
#include <vector>

#include "chanrep/nn/layers.hpp"

namespace chanrep::nn {

// Channel-to-image mapping: complex (N_k, N_R, N_T) becomes a real stacked
// image (2 N_k) x (N_R N_T) with column index r * N_T + tx.

struct EncoderConfig {
    int n_k = 16;      // image height per plane
    int n_antenna = 16; // image width (N_R * N_T)
    int patch_size = 4;
    int d_model = 64;
    int n_heads = 4;
    int depth = 2;
    int n_re = 32;
    int mlp_ratio = 4;
    int projector_hidden = 64;

    int tokens() const { return (n_k / patch_size) * (n_antenna / patch_size); }
    void validate() const;
};

// Patch embedding + positional encoding + pre-norm transformer blocks, then
// average pooling and an MLP head down to the representation width. The
// projector on top is used only while training contrastively.
struct EncoderModel {
    EncoderConfig cfg;
    ParamSet params;

    PatchEmbed embed;
    std::vector<TransformerBlock> blocks;
    LayerNorm final_ln;
    Linear head1, head2;
    Linear proj1, proj2; // projector, discarded after training

    static EncoderModel create(const EncoderConfig& cfg, std::uint64_t seed);

    Var forward(Tape& t, const Mat& image) const;           // 1 x n_re
    Var forward_projected(Tape& t, const Mat& image) const; // projector output
    Eigen::RowVectorXd encode(const Mat& image) const;      // value-only pass

    static bool is_projector_param(const Param& p);
};

struct DecoderConfig {
    int n_re = 32;
    int d_model = 64;
    int n_heads = 4;
    int depth = 3;
    int mlp_ratio = 4;
    int n_k = 16;
    int n_antenna = 16;

    int grid() const;            // token grid side, sqrt(n_re / 2)
    int patch_rows() const { return n_k / grid(); }
    int patch_cols() const { return n_antenna / grid(); }
    void validate() const;
};

// The representation is reshaped into a small two-plane image whose unit
// patches become tokens; transformer blocks widen the context and a per-token
// projection expands each token into an output patch of the channel image.
struct DecoderModel {
    DecoderConfig cfg;
    ParamSet params;

    Linear in_proj;
    std::vector<TransformerBlock> blocks;
    LayerNorm final_ln;
    Linear out_proj;

    static DecoderModel create(const DecoderConfig& cfg, std::uint64_t seed);

    Var forward(Tape& t, Var f) const; // f: 1 x n_re -> image (2 n_k) x n_antenna
    Mat decode(const Eigen::RowVectorXd& f) const;
};

struct NoiseNetConfig {
    int n_re = 32;
    int base_width = 32;
    int n_heads = 4;
    int cond_dim = 64;

    void validate() const;
};

// 1-D U-Net over the representation treated as a single-channel signal: two
// stride-2 downsamplings with width doubling, skip connections back up, and
// a cross-attention conditioning block after each convolution stage. The
// condition is the sum of the sinusoidal step embedding and an MLP embedding
// of the standardized location.
struct NoiseNetModel {
    NoiseNetConfig cfg;
    ParamSet params;

    Linear cond1, cond2;
    // conv stage weights are registered as raw params (kernel + bias pairs)
    struct Conv {
        Param* w = nullptr;
        Param* b = nullptr;
        int ksize = 3;
        int stride = 1;
    };
    Conv stem, down1a, down1b, down2a, down2b, mid, up2, up1, out;
    CrossAttention att_d1, att_d2, att_mid, att_u2, att_u1;

    // non-trainable standardization constants, stored with the checkpoint
    Param* loc_mean = nullptr;
    Param* loc_std = nullptr;
    Param* latent_mean = nullptr;
    Param* latent_std = nullptr;

    static NoiseNetModel create(const NoiseNetConfig& cfg, std::uint64_t seed);

    // x: 1 x n_re latent (standardized space), s: diffusion step (1-based).
    Var forward(Tape& t, Var x, int s, const Eigen::Vector3d& loc) const;
    Eigen::RowVectorXd predict(const Eigen::RowVectorXd& x, int s,
                               const Eigen::Vector3d& loc) const;

    Eigen::RowVectorXd standardize_latent(const Eigen::RowVectorXd& f) const;
    Eigen::RowVectorXd destandardize_latent(const Eigen::RowVectorXd& z) const;
};

} // namespace chanrep::nn

#endif
