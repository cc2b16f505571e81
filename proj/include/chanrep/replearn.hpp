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

#ifndef CHANREP_REPLEARN_HPP
#define CHANREP_REPLEARN_HPP

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "chanrep/chanmodel.hpp"
#include "chanrep/nn/models.hpp"

namespace chanrep::replearn {

using chanmodel::ChannelTensor;
using chanmodel::Dataset;
using nn::Mat;

// Complex (t, k) slice stack of one tensor as the stacked real image
// (2 N_k) x (N_R N_T), scaled by 1 / norm_scale; column index is r * N_T + tx.
Mat channel_to_image(const ChannelTensor& ch, int t, double norm_scale);
// Inverse: image back to per-subcarrier complex matrices at physical scale.
std::vector<Eigen::MatrixXcd> image_to_channel(const Mat& image, int n_rx, int n_tx,
                                               double norm_scale);

struct Representation {
    Eigen::VectorXd f;
    int bs_id = 0;
    int ue_id = 0;
    int t_index = 0;
};

// FIFO ring of L2-normalized key vectors.
class NegativeQueue {
public:
    explicit NegativeQueue(int capacity);
    void push(const Eigen::RowVectorXd& key);
    int size() const { return static_cast<int>(buf_.size()); }
    int capacity() const { return capacity_; }
    // oldest first
    Mat snapshot() const;

private:
    std::deque<Eigen::RowVectorXd> buf_;
    int capacity_;
};

// -log2 of the positive softmax probability at temperature gamma, with the
// positive key included in the denominator next to the queued negatives.
// Inputs must be L2-normalized; the queue must be nonempty.
double infonce_loss(const Eigen::RowVectorXd& query, const Eigen::RowVectorXd& positive_key,
                    const Mat& queue_keys, double temperature);

// Differentiable variant used by the training loop; `query` is a live node,
// keys are constants.
nn::Var infonce_loss_node(nn::Tape& t, nn::Var query_normalized,
                          const Eigen::RowVectorXd& positive_key, const Mat& queue_keys,
                          double temperature);

// theta_neg <- beta * theta_neg + (1 - beta) * theta_pos, elementwise over
// aligned parameter sets. beta must lie in [0, 1).
void momentum_update(nn::ParamSet& target, const nn::ParamSet& source, double beta);

struct ContrastiveConfig {
    double temperature = 5e-3;
    double momentum = 0.99;
    int queue_capacity = 512;
    int batch_size = 16;
    int steps = 1500;
    double learning_rate = 1e-3;
    double warmup_frac = 0.05;
    std::uint64_t seed = 1;

    void validate() const;
};

struct TrainLogRecord {
    int step = 0;
    double loss = 0.0;
    double lr = 0.0;
    int queue_fill = 0;
};

struct TrainResult {
    std::vector<TrainLogRecord> log;
    double final_nmse_db = 0.0; // decoder training only
};

// Writes one JSON object per line: {"step":..,"loss":..,"lr":..,"queue_fill":..}
// (queue_fill omitted when negative).
void write_train_log(const std::vector<TrainLogRecord>& log, const std::string& path,
                     bool with_queue_fill);

// Momentum-contrast training of the encoder pair on temporal positive pairs.
// The first ceil(queue/batch) steps only populate the queue. Representations
// come from the gradient branch encoder.
TrainResult train_encoder(const Dataset& ds, nn::EncoderModel& model,
                          const ContrastiveConfig& cfg);

std::vector<Representation> encode_dataset(const Dataset& ds, const nn::EncoderModel& model);

struct DecoderTrainConfig {
    int batch_size = 16;
    int steps = 3000;
    double learning_rate = 1e-3;
    double warmup_frac = 0.05;
    std::uint64_t seed = 1;
};

// MSE regression of the decoder on (representation, channel image) pairs;
// the returned result carries the final training-set reconstruction NMSE.
TrainResult train_decoder(const Dataset& ds, const std::vector<Representation>& reps,
                          nn::DecoderModel& model, const DecoderTrainConfig& cfg);

// Reconstruction of every dataset entry through encode + decode.
Dataset reconstruct_dataset(const Dataset& ds, const nn::EncoderModel& enc,
                            const nn::DecoderModel& dec);

Eigen::VectorXd mean_representation(const std::vector<Representation>& reps);

} // namespace chanrep::replearn

#endif
