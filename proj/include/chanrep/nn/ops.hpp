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

#ifndef CHANREP_NN_OPS_HPP
#define CHANREP_NN_OPS_HPP

#include <memory>
#include <vector>

#include "chanrep/nn/tape.hpp"

namespace chanrep::nn {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b); // elementwise
Var scale(Var a, double s);
Var transpose(Var a);
Var cols(Var a, int j0, int n);

Var hcat(const std::vector<Var>& parts);
Var vcat(const std::vector<Var>& parts);

// Broadcasts a 1 x c row vector over every row of a.
Var add_rowvec(Var a, Var v);
Var mul_rowvec(Var a, Var v);

Var relu(Var a);
Var gelu(Var a); // exact erf form

Var softmax_rows(Var a);
Var layernorm_rows(Var a, double eps = 1e-5); // normalization only, no affine
Var l2_normalize_rows(Var a);                 // throws on a zero-norm row
Var logsumexp_rows(Var a);                    // n x 1

Var mean_rows(Var a); // 1 x c
Var sum_all(Var a);   // 1 x 1
Var sum_sq(Var a);    // 1 x 1
Var entry(Var a, int i, int j);

// 1-D convolution over rows: x is (len x c_in), w is (ksize*c_in x c_out),
// b is (1 x c_out). Zero padding keeps ceil(len/stride) output rows.
Var conv1d(Var x, Var w, Var b, int ksize, int stride);

// Nearest-neighbour upsampling by two along rows.
Var upsample_rows2(Var a);

// Gather: out.flat(i) = a.flat(map[i]) with row-major flattening. map entries
// of -1 produce zeros. Backward scatter-adds.
Var remap(Var a, int out_rows, int out_cols,
          std::shared_ptr<const std::vector<int>> map);

} // namespace chanrep::nn

#endif
