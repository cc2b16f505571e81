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

#ifndef CHANREP_NN_PARAMS_HPP
#define CHANREP_NN_PARAMS_HPP

#include <deque>
#include <random>
#include <string>

#include "chanrep/nn/tape.hpp"

namespace chanrep::nn {

// Owns a model's parameters; references stay valid while parameters are only
// appended. Iteration order is creation order, which aligns paired models
// built from the same config.
class ParamSet {
public:
    Param& add(const std::string& name, int rows, int cols);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::deque<Param>& items() { return items_; }
    const std::deque<Param>& items() const { return items_; }

    void zero_grads();
    std::size_t scalar_count(bool trainable_only = true) const;

    // Copies values (not optimizer state) from an identically structured set.
    void copy_values_from(const ParamSet& other);

private:
    std::deque<Param> items_;
};

// Scaled uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform_fanin(Param& p, int fan_in, std::mt19937_64& rng);
// Orthonormal rows (requires cols >= rows).
void init_orthogonal_rows(Param& p, std::mt19937_64& rng);

// Adaptive-moment gradient descent; first/second moment state lives in the
// parameters themselves.
struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
    void step(ParamSet& params, double lr);

private:
    AdamConfig cfg_;
    long t_ = 0;
};

// Linear ramp from 0 to base_lr over the first warmup_frac of total_steps,
// constant afterwards. step is 1-based.
double warmup_lr(double base_lr, int step, int total_steps, double warmup_frac);

} // namespace chanrep::nn

#endif
