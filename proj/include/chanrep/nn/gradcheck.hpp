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

#ifndef CHANREP_NN_GRADCHECK_HPP
#define CHANREP_NN_GRADCHECK_HPP

#include <functional>

#include "chanrep/nn/params.hpp"

namespace chanrep::nn {

struct GradCheckOptions {
    double eps = 1e-3;
    // 0 checks every coordinate; otherwise a seeded sample per parameter.
    int max_coords_per_param = 0;
    std::uint64_t seed = 4242;
    // errors are measured relative to max(|analytic|, |numeric|, scale_floor)
    double scale_floor = 1e-4;
};

// Central-difference validation of the analytic gradient. `eval(true)` must
// zero the grads, run forward + backward and leave gradients on the
// parameters; `eval(false)` must return the loss without touching grads.
// Returns the worst relative error observed.
double grad_check(ParamSet& params, const std::function<double(bool)>& eval,
                  const GradCheckOptions& opts = {});

// Fills every trainable parameter with small uniform values; test helper for
// checking gradients away from the zero-initialized residual branches.
void randomize_params(ParamSet& params, std::mt19937_64& rng, double scale = 0.2);

} // namespace chanrep::nn

#endif
