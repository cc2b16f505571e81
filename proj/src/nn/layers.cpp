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

#include "chanrep/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace chanrep::nn {

Eigen::RowVectorXd positional_encoding(int pos, int d_model) {
    if (pos < 0) throw std::invalid_argument("positional_encoding: pos must be >= 0");
    if (d_model < 2 || d_model % 2 != 0)
        throw std::invalid_argument("positional_encoding: d_model must be even and >= 2");
    Eigen::RowVectorXd v(d_model);
    for (int i = 0; 2 * i < d_model; ++i) {
        const double rate = std::pow(10000.0, 2.0 * i / d_model);
        v(2 * i) = std::sin(pos / rate);
        v(2 * i + 1) = std::cos(pos / rate);
    }
    return v;
}

Mat positional_encoding_rows(int n_positions, int d_model) {
    Mat m(n_positions, d_model);
    for (int p = 0; p < n_positions; ++p) m.row(p) = positional_encoding(p, d_model);
    return m;
}

Linear Linear::create(ParamSet& ps, const std::string& name, int in, int out,
                      std::mt19937_64& rng, bool zero_init) {
    Linear l;
    l.w = &ps.add(name + ".w", in, out);
    l.b = &ps.add(name + ".b", 1, out);
    if (!zero_init) init_uniform_fanin(*l.w, in, rng);
    return l;
}

Var Linear::forward(Tape& t, Var x) const {
    return add_rowvec(matmul(x, t.leaf(*w)), t.leaf(*b));
}

LayerNorm LayerNorm::create(ParamSet& ps, const std::string& name, int dim) {
    LayerNorm ln;
    ln.gain = &ps.add(name + ".gain", 1, dim);
    ln.gain->value.setOnes();
    ln.bias = &ps.add(name + ".bias", 1, dim);
    return ln;
}

Var LayerNorm::forward(Tape& t, Var x) const {
    return add_rowvec(mul_rowvec(layernorm_rows(x, eps), t.leaf(*gain)), t.leaf(*bias));
}

namespace {

// softmax(Q K^T / sqrt(d_head)) V per head, heads concatenated.
Var multihead(Tape& t, Var q, Var k, Var v, int n_heads) {
    const int d = static_cast<int>(q.cols());
    const int dh = d / n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        Var qh = cols(q, h * dh, dh);
        Var kh = cols(k, h * dh, dh);
        Var vh = cols(v, h * dh, dh);
        Var att = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
        heads.push_back(matmul(att, vh));
    }
    return n_heads == 1 ? heads[0] : hcat(heads);
}

} // namespace

SelfAttention SelfAttention::create(ParamSet& ps, const std::string& name, int d_model,
                                    int n_heads, std::mt19937_64& rng, bool zero_out) {
    if (n_heads < 1 || d_model % n_heads != 0)
        throw std::invalid_argument("SelfAttention: n_heads must divide d_model");
    SelfAttention a;
    a.d_model = d_model;
    a.n_heads = n_heads;
    a.wq = &ps.add(name + ".wq", d_model, d_model);
    a.wk = &ps.add(name + ".wk", d_model, d_model);
    a.wv = &ps.add(name + ".wv", d_model, d_model);
    a.wo = &ps.add(name + ".wo", d_model, d_model);
    init_uniform_fanin(*a.wq, d_model, rng);
    init_uniform_fanin(*a.wk, d_model, rng);
    init_uniform_fanin(*a.wv, d_model, rng);
    if (!zero_out) init_uniform_fanin(*a.wo, d_model, rng);
    return a;
}

Var SelfAttention::forward(Tape& t, Var x) const {
    if (x.cols() != d_model) throw std::invalid_argument("SelfAttention: token width mismatch");
    Var q = matmul(x, t.leaf(*wq));
    Var k = matmul(x, t.leaf(*wk));
    Var v = matmul(x, t.leaf(*wv));
    return matmul(multihead(t, q, k, v, n_heads), t.leaf(*wo));
}

CrossAttention CrossAttention::create(ParamSet& ps, const std::string& name, int d_model,
                                      int cond_dim, int n_heads, std::mt19937_64& rng,
                                      bool zero_out) {
    if (n_heads < 1 || d_model % n_heads != 0)
        throw std::invalid_argument("CrossAttention: n_heads must divide d_model");
    CrossAttention a;
    a.d_model = d_model;
    a.cond_dim = cond_dim;
    a.n_heads = n_heads;
    a.wq = &ps.add(name + ".wq", d_model, d_model);
    a.wk = &ps.add(name + ".wk", cond_dim, d_model);
    a.wv = &ps.add(name + ".wv", cond_dim, d_model);
    a.wo = &ps.add(name + ".wo", d_model, d_model);
    init_uniform_fanin(*a.wq, d_model, rng);
    init_uniform_fanin(*a.wk, cond_dim, rng);
    init_uniform_fanin(*a.wv, cond_dim, rng);
    if (!zero_out) init_uniform_fanin(*a.wo, d_model, rng);
    return a;
}

Var CrossAttention::forward(Tape& t, Var x, Var cond) const {
    if (x.cols() != d_model) throw std::invalid_argument("CrossAttention: token width mismatch");
    if (cond.cols() != cond_dim)
        throw std::invalid_argument("CrossAttention: conditioning width mismatch");
    Var q = matmul(x, t.leaf(*wq));
    Var k = matmul(cond, t.leaf(*wk));
    Var v = matmul(cond, t.leaf(*wv));
    Var att = matmul(multihead(t, q, k, v, n_heads), t.leaf(*wo));
    return add(x, att);
}

Mlp Mlp::create(ParamSet& ps, const std::string& name, int dim, int hidden,
                std::mt19937_64& rng, bool zero_out) {
    Mlp m;
    m.fc1 = Linear::create(ps, name + ".fc1", dim, hidden, rng);
    m.fc2 = Linear::create(ps, name + ".fc2", hidden, dim, rng, zero_out);
    return m;
}

Var Mlp::forward(Tape& t, Var x) const { return fc2.forward(t, gelu(fc1.forward(t, x))); }

TransformerBlock TransformerBlock::create(ParamSet& ps, const std::string& name, int d_model,
                                          int n_heads, int mlp_ratio, std::mt19937_64& rng,
                                          bool zero_out) {
    TransformerBlock b;
    b.ln1 = LayerNorm::create(ps, name + ".ln1", d_model);
    b.ln2 = LayerNorm::create(ps, name + ".ln2", d_model);
    b.attn = SelfAttention::create(ps, name + ".attn", d_model, n_heads, rng, zero_out);
    b.mlp = Mlp::create(ps, name + ".mlp", d_model, mlp_ratio * d_model, rng, zero_out);
    return b;
}

Var TransformerBlock::forward(Tape& t, Var x) const {
    Var h = add(x, attn.forward(t, ln1.forward(t, x)));
    return add(h, mlp.forward(t, ln2.forward(t, h)));
}

Mat patchify(const Mat& image, int patch) {
    if (image.rows() % 2 != 0) throw std::invalid_argument("patchify: image rows must be 2A");
    const int a = static_cast<int>(image.rows()) / 2;
    const int b = static_cast<int>(image.cols());
    if (patch < 1 || a % patch != 0 || b % patch != 0)
        throw std::invalid_argument("patchify: patch size must divide both spatial dims");
    const int gh = a / patch, gw = b / patch;
    Mat tokens(gh * gw, 2 * patch * patch);
    for (int pi = 0; pi < gh; ++pi)
        for (int pj = 0; pj < gw; ++pj) {
            int col = 0;
            for (int c = 0; c < 2; ++c)
                for (int u = 0; u < patch; ++u)
                    for (int v = 0; v < patch; ++v)
                        tokens(pi * gw + pj, col++) =
                            image(c * a + pi * patch + u, pj * patch + v);
        }
    return tokens;
}

std::shared_ptr<const std::vector<int>> unpatchify_map(int a, int b, int patch_r, int patch_c) {
    if (patch_r < 1 || patch_c < 1 || a % patch_r != 0 || b % patch_c != 0)
        throw std::invalid_argument("unpatchify_map: patch must divide spatial dims");
    const int gw = b / patch_c;
    const int token_w = 2 * patch_r * patch_c;
    auto map = std::make_shared<std::vector<int>>(static_cast<std::size_t>(2 * a * b));
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < a; ++y)
            for (int x = 0; x < b; ++x) {
                const int token = (y / patch_r) * gw + (x / patch_c);
                const int j = c * patch_r * patch_c + (y % patch_r) * patch_c + (x % patch_c);
                (*map)[static_cast<std::size_t>(c * a + y) * b + x] = token * token_w + j;
            }
    return map;
}

std::shared_ptr<const std::vector<int>> patchify_map(int a, int b, int patch_r, int patch_c) {
    const auto un = unpatchify_map(a, b, patch_r, patch_c);
    const int gh = a / patch_r, gw = b / patch_c;
    const int token_w = 2 * patch_r * patch_c;
    auto map =
        std::make_shared<std::vector<int>>(static_cast<std::size_t>(gh * gw * token_w));
    for (std::size_t img_idx = 0; img_idx < un->size(); ++img_idx)
        (*map)[static_cast<std::size_t>((*un)[img_idx])] = static_cast<int>(img_idx);
    return map;
}

PatchEmbed PatchEmbed::create(ParamSet& ps, const std::string& name, int patch, int d_model,
                              std::mt19937_64& rng) {
    PatchEmbed pe;
    pe.patch = patch;
    pe.proj = Linear::create(ps, name + ".proj", 2 * patch * patch, d_model, rng);
    return pe;
}

Var PatchEmbed::forward(Tape& t, const Mat& image) const {
    return proj.forward(t, t.constant(patchify(image, patch)));
}

} // namespace chanrep::nn
