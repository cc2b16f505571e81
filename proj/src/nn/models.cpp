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

#include "chanrep/nn/models.hpp"

#include <cmath>
#include <stdexcept>

#include "chanrep/common.hpp"

namespace chanrep::nn {

void EncoderConfig::validate() const {
    if (n_k < 1 || n_antenna < 1) throw std::invalid_argument("EncoderConfig: bad input shape");
    if (patch_size < 1 || n_k % patch_size != 0 || n_antenna % patch_size != 0)
        throw std::invalid_argument("EncoderConfig: patch size must divide both spatial dims");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("EncoderConfig: d_model must be divisible by n_heads");
    if (d_model % 2 != 0) throw std::invalid_argument("EncoderConfig: d_model must be even");
    if (depth < 1 || n_re < 1) throw std::invalid_argument("EncoderConfig: bad depth or n_re");
}

EncoderModel EncoderModel::create(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    EncoderModel m;
    m.cfg = cfg;
    std::mt19937_64 rng(mix_seed(seed, 0xe11c0de));

    m.embed = PatchEmbed::create(m.params, "embed", cfg.patch_size, cfg.d_model, rng);
    for (int i = 0; i < cfg.depth; ++i)
        m.blocks.push_back(TransformerBlock::create(m.params, "block" + std::to_string(i),
                                                    cfg.d_model, cfg.n_heads, cfg.mlp_ratio,
                                                    rng));
    m.final_ln = LayerNorm::create(m.params, "final_ln", cfg.d_model);
    m.head1 = Linear::create(m.params, "head1", cfg.d_model, cfg.d_model, rng);
    m.head2 = Linear::create(m.params, "head2", cfg.d_model, cfg.n_re, rng);
    m.proj1 = Linear::create(m.params, "projector.fc1", cfg.n_re, cfg.projector_hidden, rng);
    m.proj2 = Linear::create(m.params, "projector.fc2", cfg.projector_hidden, cfg.n_re, rng);
    return m;
}

bool EncoderModel::is_projector_param(const Param& p) {
    return p.name.rfind("projector.", 0) == 0;
}

Var EncoderModel::forward(Tape& t, const Mat& image) const {
    if (image.rows() != 2 * cfg.n_k || image.cols() != cfg.n_antenna)
        throw std::invalid_argument("EncoderModel: image shape mismatch");
    Var x = embed.forward(t, image);
    x = add(x, t.constant(positional_encoding_rows(cfg.tokens(), cfg.d_model)));
    for (const TransformerBlock& b : blocks) x = b.forward(t, x);
    x = final_ln.forward(t, x);
    Var pooled = mean_rows(x);
    return head2.forward(t, gelu(head1.forward(t, pooled)));
}

Var EncoderModel::forward_projected(Tape& t, const Mat& image) const {
    Var f = forward(t, image);
    return proj2.forward(t, gelu(proj1.forward(t, f)));
}

Eigen::RowVectorXd EncoderModel::encode(const Mat& image) const {
    Tape t;
    return forward(t, image).value().row(0);
}

int DecoderConfig::grid() const {
    return static_cast<int>(std::lround(std::sqrt(n_re / 2.0)));
}

void DecoderConfig::validate() const {
    if (n_re < 2 || n_re % 2 != 0) throw std::invalid_argument("DecoderConfig: bad n_re");
    const int g = grid();
    if (2 * g * g != n_re)
        throw std::invalid_argument("DecoderConfig: n_re / 2 must be a perfect square");
    if (n_k % g != 0 || n_antenna % g != 0)
        throw std::invalid_argument("DecoderConfig: token grid must divide the output dims");
    if (d_model % n_heads != 0 || d_model % 2 != 0)
        throw std::invalid_argument("DecoderConfig: d_model must be even and divisible by heads");
    if (depth < 1) throw std::invalid_argument("DecoderConfig: bad depth");
}

DecoderModel DecoderModel::create(const DecoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    DecoderModel m;
    m.cfg = cfg;
    std::mt19937_64 rng(mix_seed(seed, 0xdec0de));

    m.in_proj = Linear::create(m.params, "in_proj", 2, cfg.d_model, rng);
    for (int i = 0; i < cfg.depth; ++i)
        m.blocks.push_back(TransformerBlock::create(m.params, "block" + std::to_string(i),
                                                    cfg.d_model, cfg.n_heads, cfg.mlp_ratio,
                                                    rng));
    m.final_ln = LayerNorm::create(m.params, "final_ln", cfg.d_model);
    m.out_proj = Linear::create(m.params, "out_proj", cfg.d_model,
                                2 * cfg.patch_rows() * cfg.patch_cols(), rng);
    return m;
}

Var DecoderModel::forward(Tape& t, Var f) const {
    if (f.rows() != 1 || f.cols() != cfg.n_re)
        throw std::invalid_argument("DecoderModel: representation width mismatch");
    const int g = cfg.grid();

    // tokens x 2: token (i, j) reads the two plane values of the reshaped
    // (2, g, g) representation
    auto map = std::make_shared<std::vector<int>>(static_cast<std::size_t>(g * g * 2));
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j)
            for (int c = 0; c < 2; ++c)
                (*map)[static_cast<std::size_t>(i * g + j) * 2 + c] = c * g * g + i * g + j;
    Var tokens = remap(f, g * g, 2, map);

    Var x = in_proj.forward(t, tokens);
    x = add(x, t.constant(positional_encoding_rows(g * g, cfg.d_model)));
    for (const TransformerBlock& b : blocks) x = b.forward(t, x);
    x = final_ln.forward(t, x);
    Var patches = out_proj.forward(t, x);
    return remap(patches, 2 * cfg.n_k, cfg.n_antenna,
                 unpatchify_map(cfg.n_k, cfg.n_antenna, cfg.patch_rows(), cfg.patch_cols()));
}

Mat DecoderModel::decode(const Eigen::RowVectorXd& f) const {
    Tape t;
    return forward(t, t.constant(f)).value();
}

void NoiseNetConfig::validate() const {
    if (n_re < 4 || n_re % 4 != 0)
        throw std::invalid_argument("NoiseNetConfig: n_re must be divisible by 4");
    if (base_width < n_heads || base_width % n_heads != 0)
        throw std::invalid_argument("NoiseNetConfig: n_heads must divide base_width");
    if (cond_dim % 2 != 0) throw std::invalid_argument("NoiseNetConfig: cond_dim must be even");
}

namespace {

NoiseNetModel::Conv make_conv(ParamSet& ps, const std::string& name, int cin, int cout,
                              int ksize, int stride, std::mt19937_64& rng,
                              bool zero_init = false) {
    NoiseNetModel::Conv c;
    c.w = &ps.add(name + ".w", ksize * cin, cout);
    c.b = &ps.add(name + ".b", 1, cout);
    c.ksize = ksize;
    c.stride = stride;
    if (!zero_init) init_uniform_fanin(*c.w, ksize * cin, rng);
    return c;
}

Var conv_forward(Tape& t, const NoiseNetModel::Conv& c, Var x) {
    return conv1d(x, t.leaf(*c.w), t.leaf(*c.b), c.ksize, c.stride);
}

} // namespace

NoiseNetModel NoiseNetModel::create(const NoiseNetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    NoiseNetModel m;
    m.cfg = cfg;
    std::mt19937_64 rng(mix_seed(seed, 0x0153));
    const int w = cfg.base_width;

    m.cond1 = Linear::create(m.params, "cond.fc1", 3, cfg.cond_dim, rng);
    m.cond2 = Linear::create(m.params, "cond.fc2", cfg.cond_dim, cfg.cond_dim, rng);

    m.stem = make_conv(m.params, "stem", 1, w, 3, 1, rng);
    m.down1a = make_conv(m.params, "down1a", w, w, 3, 1, rng);
    m.att_d1 = CrossAttention::create(m.params, "att_d1", w, cfg.cond_dim, cfg.n_heads, rng);
    m.down1b = make_conv(m.params, "down1b", w, 2 * w, 3, 2, rng);
    m.down2a = make_conv(m.params, "down2a", 2 * w, 2 * w, 3, 1, rng);
    m.att_d2 =
        CrossAttention::create(m.params, "att_d2", 2 * w, cfg.cond_dim, cfg.n_heads, rng);
    m.down2b = make_conv(m.params, "down2b", 2 * w, 4 * w, 3, 2, rng);
    m.mid = make_conv(m.params, "mid", 4 * w, 4 * w, 3, 1, rng);
    m.att_mid =
        CrossAttention::create(m.params, "att_mid", 4 * w, cfg.cond_dim, cfg.n_heads, rng);
    m.up2 = make_conv(m.params, "up2", 6 * w, 2 * w, 3, 1, rng);
    m.att_u2 =
        CrossAttention::create(m.params, "att_u2", 2 * w, cfg.cond_dim, cfg.n_heads, rng);
    m.up1 = make_conv(m.params, "up1", 3 * w, w, 3, 1, rng);
    m.att_u1 = CrossAttention::create(m.params, "att_u1", w, cfg.cond_dim, cfg.n_heads, rng);
    m.out = make_conv(m.params, "out", w, 1, 3, 1, rng, /*zero_init=*/true);

    m.loc_mean = &m.params.add("stats.loc_mean", 1, 3);
    m.loc_std = &m.params.add("stats.loc_std", 1, 3);
    m.loc_std->value.setOnes();
    m.latent_mean = &m.params.add("stats.latent_mean", 1, cfg.n_re);
    m.latent_std = &m.params.add("stats.latent_std", 1, cfg.n_re);
    m.latent_std->value.setOnes();
    m.loc_mean->trainable = false;
    m.loc_std->trainable = false;
    m.latent_mean->trainable = false;
    m.latent_std->trainable = false;
    return m;
}

Var NoiseNetModel::forward(Tape& t, Var x, int s, const Eigen::Vector3d& loc) const {
    if (x.rows() != 1 || x.cols() != cfg.n_re)
        throw std::invalid_argument("NoiseNetModel: latent width mismatch");
    if (s < 1) throw std::invalid_argument("NoiseNetModel: step must be >= 1");

    Eigen::RowVector3d locz;
    for (int i = 0; i < 3; ++i)
        locz(i) = (loc(i) - loc_mean->value(0, i)) / loc_std->value(0, i);
    Var c = cond2.forward(t, gelu(cond1.forward(t, t.constant(locz))));
    Var cond = add(c, t.constant(positional_encoding(s, cfg.cond_dim)));

    Var signal = transpose(x); // n_re x 1, rows as positions
    Var h = gelu(conv_forward(t, stem, signal));
    Var d1 = att_d1.forward(t, gelu(conv_forward(t, down1a, h)), cond);
    Var h2 = gelu(conv_forward(t, down1b, d1));
    Var d2 = att_d2.forward(t, gelu(conv_forward(t, down2a, h2)), cond);
    Var h3 = gelu(conv_forward(t, down2b, d2));
    Var m = att_mid.forward(t, gelu(conv_forward(t, mid, h3)), cond);

    Var u2 = hcat({upsample_rows2(m), d2});
    u2 = att_u2.forward(t, gelu(conv_forward(t, up2, u2)), cond);
    Var u1 = hcat({upsample_rows2(u2), d1});
    u1 = att_u1.forward(t, gelu(conv_forward(t, up1, u1)), cond);
    return transpose(conv_forward(t, out, u1));
}

Eigen::RowVectorXd NoiseNetModel::predict(const Eigen::RowVectorXd& x, int s,
                                          const Eigen::Vector3d& loc) const {
    Tape t;
    return forward(t, t.constant(x), s, loc).value().row(0);
}

Eigen::RowVectorXd NoiseNetModel::standardize_latent(const Eigen::RowVectorXd& f) const {
    return (f - latent_mean->value.row(0)).cwiseQuotient(latent_std->value.row(0));
}

Eigen::RowVectorXd NoiseNetModel::destandardize_latent(const Eigen::RowVectorXd& z) const {
    return z.cwiseProduct(latent_std->value.row(0)) + latent_mean->value.row(0);
}

} // namespace chanrep::nn
