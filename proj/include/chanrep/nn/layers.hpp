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

#ifndef CHANREP_NN_LAYERS_HPP
#define CHANREP_NN_LAYERS_HPP

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "chanrep/nn/ops.hpp"
#include "chanrep/nn/params.hpp"

namespace chanrep::nn {

// Sine/cosine positional encoding: even index 2i carries
// sin(pos / 10000^(2i/d)), odd index 2i+1 the matching cosine.
Eigen::RowVectorXd positional_encoding(int pos, int d_model);
Mat positional_encoding_rows(int n_positions, int d_model); // pos = 0..n-1

struct Linear {
    Param* w = nullptr; // in x out
    Param* b = nullptr; // 1 x out

    static Linear create(ParamSet& ps, const std::string& name, int in, int out,
                         std::mt19937_64& rng, bool zero_init = false);
    Var forward(Tape& t, Var x) const; // x: n x in
};

struct LayerNorm {
    Param* gain = nullptr; // 1 x d
    Param* bias = nullptr; // 1 x d
    double eps = 1e-5;

    static LayerNorm create(ParamSet& ps, const std::string& name, int dim);
    Var forward(Tape& t, Var x) const;
};

// Rows-as-tokens multi-head attention: queries, keys and values come from
// right-multiplication by d_model x d_model projections, heads are column
// blocks of width d_model / n_heads, concatenated and output-projected.
struct SelfAttention {
    int d_model = 0;
    int n_heads = 1;
    Param* wq = nullptr;
    Param* wk = nullptr;
    Param* wv = nullptr;
    Param* wo = nullptr;

    static SelfAttention create(ParamSet& ps, const std::string& name, int d_model,
                                int n_heads, std::mt19937_64& rng, bool zero_out = true);
    Var forward(Tape& t, Var x) const;
};

// Queries from the feature rows, keys/values from the conditioning rows; the
// result is added back onto the input.
struct CrossAttention {
    int d_model = 0;
    int cond_dim = 0;
    int n_heads = 1;
    Param* wq = nullptr;
    Param* wk = nullptr; // cond_dim x d_model
    Param* wv = nullptr; // cond_dim x d_model
    Param* wo = nullptr;

    static CrossAttention create(ParamSet& ps, const std::string& name, int d_model,
                                 int cond_dim, int n_heads, std::mt19937_64& rng,
                                 bool zero_out = true);
    Var forward(Tape& t, Var x, Var cond) const;
};

struct Mlp {
    Linear fc1, fc2;

    static Mlp create(ParamSet& ps, const std::string& name, int dim, int hidden,
                      std::mt19937_64& rng, bool zero_out = true);
    Var forward(Tape& t, Var x) const; // gelu between the two projections
};

// Pre-norm residual block: x + attn(LN(x)), then + mlp(LN(.)).
struct TransformerBlock {
    LayerNorm ln1, ln2;
    SelfAttention attn;
    Mlp mlp;

    static TransformerBlock create(ParamSet& ps, const std::string& name, int d_model,
                                   int n_heads, int mlp_ratio, std::mt19937_64& rng,
                                   bool zero_out = true);
    Var forward(Tape& t, Var x) const;
};

// Channel image layout: the real plane stacked above the imaginary plane,
// (2A) x B for a complex A x B image. Patches tile the A x B grid and span
// both planes; token order is row-major over patches, the within-token order
// is (plane, patch row, patch col).
Mat patchify(const Mat& image, int patch); // (2A x B) -> tokens x (2 p^2)

// Index maps for remap(): token matrix <-> stacked-plane image.
std::shared_ptr<const std::vector<int>> patchify_map(int a, int b, int patch_r, int patch_c);
std::shared_ptr<const std::vector<int>> unpatchify_map(int a, int b, int patch_r, int patch_c);

struct PatchEmbed {
    Linear proj;
    int patch = 1;

    static PatchEmbed create(ParamSet& ps, const std::string& name, int patch, int d_model,
                             std::mt19937_64& rng);
    // image constant input path
    Var forward(Tape& t, const Mat& image) const;
};

} // namespace chanrep::nn

#endif
