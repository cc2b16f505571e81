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

#include "chanrep/nn/tape.hpp"

#include <stdexcept>

namespace chanrep::nn {

const Mat& Var::value() const {
    if (!tape_) throw std::logic_error("Var: empty handle");
    return tape_->value(id_);
}

Var Tape::constant(Mat value) {
    nodes_.push_back(Node{std::move(value), {}, false, nullptr, nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Param& p) {
    Node n;
    n.value = p.value;
    n.needs_grad = p.trainable;
    n.param = p.trainable ? &p : nullptr;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::node(Mat value, bool needs_grad, std::function<void(Tape&)> backward) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Mat& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw std::logic_error("Tape::backward: foreign node");
    Node& ln = nodes_[static_cast<std::size_t>(loss.id())];
    if (ln.value.rows() != 1 || ln.value.cols() != 1)
        throw std::invalid_argument("Tape::backward: loss must be scalar");
    if (!ln.needs_grad) return;
    ln.grad = Mat::Ones(1, 1);

    for (int i = loss.id(); i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.needs_grad || n.grad.size() == 0) continue;
        if (n.param) {
            if (n.param->grad.size() == 0)
                n.param->grad = Mat::Zero(n.value.rows(), n.value.cols());
            n.param->grad += n.grad;
        }
        if (n.backward) n.backward(*this);
    }
}

} // namespace chanrep::nn
