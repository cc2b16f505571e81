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

#ifndef CHANREP_NN_TAPE_HPP
#define CHANREP_NN_TAPE_HPP

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace chanrep::nn {

using Mat = Eigen::MatrixXd;

class Tape;

// Persistent named array; gradients accumulate here when a tape holding a
// leaf of it is run backward. Kept outside the tape so one parameter can be
// reused across many forward graphs.
struct Param {
    std::string name;
    Mat value;
    Mat grad;
    Mat adam_m, adam_v;
    bool trainable = true;

    void zero_grad() { grad.resize(0, 0); }
};

// Handle into a tape node.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    const Mat& value() const;
    int id() const { return id_; }
    Tape* tape() const { return tape_; }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    explicit operator bool() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

// Dynamically built computation graph. Nodes are appended in evaluation
// order, so a single reverse sweep is a valid topological order.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Mat value);
    Var leaf(Param& p);
    Var node(Mat value, bool needs_grad, std::function<void(Tape&)> backward);

    const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    const Mat& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    // Adds g into the gradient of `id`; no-op when the node does not track
    // gradients.
    void accumulate(int id, const Mat& g);

    // Seeds the (1x1) loss node with gradient one and sweeps the graph in
    // reverse, accumulating leaf gradients into their parameters.
    void backward(Var loss);

    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat value;
        Mat grad;
        bool needs_grad = false;
        Param* param = nullptr;
        std::function<void(Tape&)> backward;
    };
    std::deque<Node> nodes_;
};

} // namespace chanrep::nn

#endif
