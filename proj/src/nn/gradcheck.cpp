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

#include "chanrep/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "chanrep/common.hpp"

namespace chanrep::nn {

double grad_check(ParamSet& params, const std::function<double(bool)>& eval,
                  const GradCheckOptions& opts) {
    eval(true);

    // snapshot the analytic gradients before probing
    std::vector<Mat> analytic;
    for (const Param& p : params.items())
        analytic.push_back(p.grad.size() == 0
                               ? Mat::Zero(p.value.rows(), p.value.cols()).eval()
                               : p.grad);

    std::mt19937_64 rng(opts.seed);
    double worst = 0.0;
    std::size_t pi = 0;
    for (Param& p : params.items()) {
        const Mat& g = analytic[pi++];
        if (!p.trainable) continue;
        const Eigen::Index total = p.value.size();

        std::vector<Eigen::Index> coords(static_cast<std::size_t>(total));
        std::iota(coords.begin(), coords.end(), 0);
        if (opts.max_coords_per_param > 0 &&
            total > static_cast<Eigen::Index>(opts.max_coords_per_param)) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(static_cast<std::size_t>(opts.max_coords_per_param));
        }

        for (const Eigen::Index flat : coords) {
            const Eigen::Index i = flat / p.value.cols();
            const Eigen::Index j = flat % p.value.cols();
            const double orig = p.value(i, j);
            p.value(i, j) = orig + opts.eps;
            const double up = eval(false);
            p.value(i, j) = orig - opts.eps;
            const double down = eval(false);
            p.value(i, j) = orig;

            const double numeric = (up - down) / (2.0 * opts.eps);
            const double a = g(i, j);
            const double denom =
                std::max({std::abs(a), std::abs(numeric), opts.scale_floor});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

void randomize_params(ParamSet& params, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (Param& p : params.items()) {
        if (!p.trainable) continue;
        for (Eigen::Index i = 0; i < p.value.rows(); ++i)
            for (Eigen::Index j = 0; j < p.value.cols(); ++j) p.value(i, j) = u(rng);
    }
}

} // namespace chanrep::nn
