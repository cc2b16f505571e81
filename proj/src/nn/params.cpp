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

#include "chanrep/nn/params.hpp"

#include <Eigen/QR>
#include <cmath>
#include <stdexcept>

namespace chanrep::nn {

Param& ParamSet::add(const std::string& name, int rows, int cols) {
    if (contains(name)) throw std::invalid_argument("ParamSet: duplicate name " + name);
    Param p;
    p.name = name;
    p.value = Mat::Zero(rows, cols);
    items_.push_back(std::move(p));
    return items_.back();
}

Param& ParamSet::at(const std::string& name) {
    for (Param& p : items_)
        if (p.name == name) return p;
    throw std::out_of_range("ParamSet: unknown name " + name);
}

const Param& ParamSet::at(const std::string& name) const {
    for (const Param& p : items_)
        if (p.name == name) return p;
    throw std::out_of_range("ParamSet: unknown name " + name);
}

bool ParamSet::contains(const std::string& name) const {
    for (const Param& p : items_)
        if (p.name == name) return true;
    return false;
}

void ParamSet::zero_grads() {
    for (Param& p : items_) p.zero_grad();
}

std::size_t ParamSet::scalar_count(bool trainable_only) const {
    std::size_t n = 0;
    for (const Param& p : items_)
        if (!trainable_only || p.trainable) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void ParamSet::copy_values_from(const ParamSet& other) {
    if (items_.size() != other.items_.size())
        throw std::invalid_argument("ParamSet: structure mismatch");
    auto it = items_.begin();
    auto ot = other.items_.begin();
    for (; it != items_.end(); ++it, ++ot) {
        if (it->name != ot->name || it->value.rows() != ot->value.rows() ||
            it->value.cols() != ot->value.cols())
            throw std::invalid_argument("ParamSet: structure mismatch at " + it->name);
        it->value = ot->value;
    }
}

void init_uniform_fanin(Param& p, int fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < p.value.rows(); ++i)
        for (Eigen::Index j = 0; j < p.value.cols(); ++j) p.value(i, j) = u(rng);
}

void init_orthogonal_rows(Param& p, std::mt19937_64& rng) {
    const Eigen::Index r = p.value.rows(), c = p.value.cols();
    if (c < r) throw std::invalid_argument("init_orthogonal_rows: needs cols >= rows");
    std::normal_distribution<double> n(0.0, 1.0);
    Mat g(c, r);
    for (Eigen::Index i = 0; i < c; ++i)
        for (Eigen::Index j = 0; j < r; ++j) g(i, j) = n(rng);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(c, r);
    p.value = q.transpose();
}

void Adam::step(ParamSet& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Param& p : params.items()) {
        if (!p.trainable || p.grad.size() == 0) continue;
        if (p.adam_m.size() == 0) {
            p.adam_m = Mat::Zero(p.value.rows(), p.value.cols());
            p.adam_v = Mat::Zero(p.value.rows(), p.value.cols());
        }
        p.adam_m = cfg_.beta1 * p.adam_m + (1.0 - cfg_.beta1) * p.grad;
        p.adam_v = cfg_.beta2 * p.adam_v.array().matrix() +
                   (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
        const Mat m_hat = p.adam_m / bc1;
        const Mat v_hat = p.adam_v / bc2;
        p.value -= lr * (m_hat.array() / (v_hat.array().sqrt() + cfg_.eps)).matrix();
    }
}

double warmup_lr(double base_lr, int step, int total_steps, double warmup_frac) {
    const int warm = std::max(1, static_cast<int>(warmup_frac * total_steps));
    if (step <= warm) return base_lr * static_cast<double>(step) / warm;
    return base_lr;
}

} // namespace chanrep::nn
