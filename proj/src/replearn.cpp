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

#include "chanrep/replearn.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace chanrep::replearn {

namespace {

constexpr double kLn2 = 0.6931471805599453094;

} // namespace

Mat channel_to_image(const ChannelTensor& ch, int t, double norm_scale) {
    if (!(norm_scale > 0.0)) throw std::invalid_argument("channel_to_image: bad norm scale");
    const int n_k = ch.n_subcarriers(), n_r = ch.n_rx(), n_tx = ch.n_tx();
    Mat img(2 * n_k, n_r * n_tx);
    for (int k = 0; k < n_k; ++k) {
        const Eigen::MatrixXcd& h = ch.at(t, k);
        for (int r = 0; r < n_r; ++r)
            for (int c = 0; c < n_tx; ++c) {
                img(k, r * n_tx + c) = h(r, c).real() / norm_scale;
                img(n_k + k, r * n_tx + c) = h(r, c).imag() / norm_scale;
            }
    }
    return img;
}

std::vector<Eigen::MatrixXcd> image_to_channel(const Mat& image, int n_rx, int n_tx,
                                               double norm_scale) {
    if (image.rows() % 2 != 0 || image.cols() != static_cast<Eigen::Index>(n_rx) * n_tx)
        throw std::invalid_argument("image_to_channel: shape mismatch");
    const int n_k = static_cast<int>(image.rows()) / 2;
    std::vector<Eigen::MatrixXcd> out(static_cast<std::size_t>(n_k));
    for (int k = 0; k < n_k; ++k) {
        Eigen::MatrixXcd h(n_rx, n_tx);
        for (int r = 0; r < n_rx; ++r)
            for (int c = 0; c < n_tx; ++c)
                h(r, c) = std::complex<double>(image(k, r * n_tx + c),
                                               image(n_k + k, r * n_tx + c)) *
                          norm_scale;
        out[static_cast<std::size_t>(k)] = std::move(h);
    }
    return out;
}

NegativeQueue::NegativeQueue(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("NegativeQueue: capacity must be >= 1");
}

void NegativeQueue::push(const Eigen::RowVectorXd& key) {
    buf_.push_back(key);
    while (static_cast<int>(buf_.size()) > capacity_) buf_.pop_front();
}

Mat NegativeQueue::snapshot() const {
    if (buf_.empty()) return Mat(0, 0);
    Mat out(static_cast<Eigen::Index>(buf_.size()), buf_.front().size());
    for (std::size_t i = 0; i < buf_.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = buf_[i];
    return out;
}

double infonce_loss(const Eigen::RowVectorXd& query, const Eigen::RowVectorXd& positive_key,
                    const Mat& queue_keys, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("infonce_loss: temperature must be > 0");
    if (queue_keys.rows() < 1) throw std::invalid_argument("infonce_loss: queue is empty");
    if (!(query.norm() > 1e-300) || !(positive_key.norm() > 1e-300))
        throw std::invalid_argument("infonce_loss: zero-norm input");

    const double pos = query.dot(positive_key) / temperature;
    // stable log-sum-exp over the positive and the queued negatives
    double m = pos;
    Eigen::VectorXd negs(queue_keys.rows());
    for (Eigen::Index i = 0; i < queue_keys.rows(); ++i) {
        negs(i) = query.dot(queue_keys.row(i)) / temperature;
        m = std::max(m, negs(i));
    }
    double denom = std::exp(pos - m);
    for (Eigen::Index i = 0; i < negs.size(); ++i) denom += std::exp(negs(i) - m);
    const double log_prob = pos - (m + std::log(denom));
    return -log_prob / kLn2;
}

nn::Var infonce_loss_node(nn::Tape& t, nn::Var query_normalized,
                          const Eigen::RowVectorXd& positive_key, const Mat& queue_keys,
                          double temperature) {
    using nn::Var;
    if (queue_keys.rows() < 1) throw std::invalid_argument("infonce_loss: queue is empty");
    Mat keys(queue_keys.rows() + 1, positive_key.size());
    keys.row(0) = positive_key;
    keys.bottomRows(queue_keys.rows()) = queue_keys;
    Var logits = nn::scale(nn::matmul(query_normalized, t.constant(keys.transpose())),
                           1.0 / temperature);
    Var nats = nn::sub(nn::logsumexp_rows(logits), nn::entry(logits, 0, 0));
    return nn::scale(nats, 1.0 / kLn2);
}

void momentum_update(nn::ParamSet& target, const nn::ParamSet& source, double beta) {
    if (!(beta >= 0.0) || beta >= 1.0)
        throw std::invalid_argument("momentum_update: beta must lie in [0, 1)");
    if (target.items().size() != source.items().size())
        throw std::invalid_argument("momentum_update: parameter lists differ");
    auto it = target.items().begin();
    auto is = source.items().begin();
    for (; it != target.items().end(); ++it, ++is) {
        if (it->name != is->name || it->value.size() != is->value.size())
            throw std::invalid_argument("momentum_update: misaligned parameter " + it->name);
        it->value = beta * it->value + (1.0 - beta) * is->value;
    }
}

void ContrastiveConfig::validate() const {
    if (!(temperature > 0.0)) throw std::invalid_argument("ContrastiveConfig: bad temperature");
    if (!(momentum >= 0.0) || momentum >= 1.0)
        throw std::invalid_argument("ContrastiveConfig: momentum must lie in [0, 1)");
    if (queue_capacity < 1 || batch_size < 1 || steps < 1)
        throw std::invalid_argument("ContrastiveConfig: bad sizes");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("ContrastiveConfig: bad lr");
}

void write_train_log(const std::vector<TrainLogRecord>& log, const std::string& path,
                     bool with_queue_fill) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_train_log: cannot open " + path);
    for (const TrainLogRecord& r : log) {
        nlohmann::json j{{"step", r.step}, {"loss", r.loss}, {"lr", r.lr}};
        if (with_queue_fill) j["queue_fill"] = r.queue_fill;
        os << j.dump() << "\n";
    }
}

TrainResult train_encoder(const Dataset& ds, nn::EncoderModel& model,
                          const ContrastiveConfig& cfg) {
    cfg.validate();
    if (ds.entries.empty()) throw std::invalid_argument("train_encoder: empty dataset");
    if (ds.scene.n_times < 2)
        throw std::invalid_argument("train_encoder: positive pairs need at least two instants");

    const int n_t = ds.scene.n_times;
    // precompute the normalized input images
    std::vector<std::vector<Mat>> images(ds.entries.size());
    for (std::size_t e = 0; e < ds.entries.size(); ++e) {
        images[e].reserve(static_cast<std::size_t>(n_t));
        for (int t = 0; t < n_t; ++t)
            images[e].push_back(channel_to_image(ds.entries[e].channel, t, ds.norm_scale));
    }

    nn::EncoderModel key_model = nn::EncoderModel::create(model.cfg, 0);
    key_model.params.copy_values_from(model.params);

    NegativeQueue queue(cfg.queue_capacity);
    nn::Adam adam;
    std::mt19937_64 rng(mix_seed(cfg.seed, 0xc0de));
    std::uniform_int_distribution<std::size_t> pick_entry(0, ds.entries.size() - 1);
    std::uniform_int_distribution<int> pick_t(0, n_t - 1);

    const int warmup_steps = (cfg.queue_capacity + cfg.batch_size - 1) / cfg.batch_size;

    TrainResult result;
    for (int step = 1; step <= cfg.steps; ++step) {
        // batch of positive pairs: same entry, two distinct instants
        std::vector<const Mat*> q_imgs, k_imgs;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const std::size_t e = pick_entry(rng);
            const int t1 = pick_t(rng);
            int t2 = pick_t(rng);
            while (t2 == t1) t2 = pick_t(rng);
            q_imgs.push_back(&images[e][static_cast<std::size_t>(t1)]);
            k_imgs.push_back(&images[e][static_cast<std::size_t>(t2)]);
        }

        // key branch: value-only pass through the momentum encoder
        std::vector<Eigen::RowVectorXd> keys;
        keys.reserve(k_imgs.size());
        for (const Mat* img : k_imgs) {
            nn::Tape kt;
            Eigen::RowVectorXd k = key_model.forward_projected(kt, *img).value().row(0);
            const double n = k.norm();
            if (!(n > 1e-300)) throw std::runtime_error("train_encoder: zero-norm key");
            keys.push_back(k / n);
        }

        const Mat negatives = queue.snapshot();
        const bool warm = step <= warmup_steps;
        const double lr = nn::warmup_lr(cfg.learning_rate, std::max(1, step - warmup_steps),
                                        std::max(1, cfg.steps - warmup_steps), cfg.warmup_frac);

        double loss_value = 0.0;
        if (negatives.rows() > 0) {
            nn::Tape t;
            std::vector<nn::Var> losses;
            for (int b = 0; b < cfg.batch_size; ++b) {
                nn::Var q = nn::l2_normalize_rows(
                    model.forward_projected(t, *q_imgs[static_cast<std::size_t>(b)]));
                losses.push_back(infonce_loss_node(t, q, keys[static_cast<std::size_t>(b)],
                                                   negatives, cfg.temperature));
            }
            nn::Var loss = nn::scale(nn::sum_all(nn::vcat(losses)), 1.0 / cfg.batch_size);
            loss_value = loss.value()(0, 0);
            if (!warm) {
                model.params.zero_grads();
                t.backward(loss);
                adam.step(model.params, lr);
                momentum_update(key_model.params, model.params, cfg.momentum);
            }
        }

        for (const Eigen::RowVectorXd& k : keys) queue.push(k);
        result.log.push_back({step, loss_value, warm ? 0.0 : lr, queue.size()});
    }
    return result;
}

std::vector<Representation> encode_dataset(const Dataset& ds, const nn::EncoderModel& model) {
    std::vector<Representation> out;
    out.reserve(ds.entries.size() * static_cast<std::size_t>(ds.scene.n_times));
    for (const chanmodel::DatasetEntry& e : ds.entries)
        for (int t = 0; t < ds.scene.n_times; ++t) {
            Representation r;
            r.f = model.encode(channel_to_image(e.channel, t, ds.norm_scale)).transpose();
            r.bs_id = e.bs_id;
            r.ue_id = e.ue_id;
            r.t_index = t;
            out.push_back(std::move(r));
        }
    return out;
}

TrainResult train_decoder(const Dataset& ds, const std::vector<Representation>& reps,
                          nn::DecoderModel& model, const DecoderTrainConfig& cfg) {
    if (reps.empty()) throw std::invalid_argument("train_decoder: no training pairs");
    if (cfg.batch_size < 1 || cfg.steps < 1 || !(cfg.learning_rate > 0.0))
        throw std::invalid_argument("train_decoder: bad config");

    // pair every representation with its channel image
    std::vector<Mat> targets;
    targets.reserve(reps.size());
    for (const Representation& r : reps) {
        const chanmodel::DatasetEntry* e = ds.find(r.bs_id, r.ue_id);
        if (!e) throw std::invalid_argument("train_decoder: representation without channel");
        targets.push_back(channel_to_image(e->channel, r.t_index, ds.norm_scale));
    }

    nn::Adam adam;
    std::mt19937_64 rng(mix_seed(cfg.seed, 0xdec));
    std::uniform_int_distribution<std::size_t> pick(0, reps.size() - 1);

    TrainResult result;
    for (int step = 1; step <= cfg.steps; ++step) {
        const double lr = nn::warmup_lr(cfg.learning_rate, step, cfg.steps, cfg.warmup_frac);
        nn::Tape t;
        std::vector<nn::Var> losses;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const std::size_t i = pick(rng);
            nn::Var out = model.forward(t, t.constant(reps[i].f.transpose()));
            losses.push_back(nn::sum_sq(nn::sub(out, t.constant(targets[i]))));
        }
        nn::Var loss = nn::scale(nn::sum_all(nn::vcat(losses)), 1.0 / cfg.batch_size);
        model.params.zero_grads();
        t.backward(loss);
        adam.step(model.params, lr);
        result.log.push_back({step, loss.value()(0, 0), lr, -1});
    }

    // training-set reconstruction error; the scale factor cancels, so this is
    // the physical-scale value
    double acc = 0.0;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const Mat out = model.decode(reps[i].f.transpose());
        acc += (out - targets[i]).squaredNorm() / targets[i].squaredNorm();
    }
    const double mean = acc / static_cast<double>(reps.size());
    result.final_nmse_db = mean > 0.0 ? 10.0 * std::log10(mean) : -300.0;
    return result;
}

Dataset reconstruct_dataset(const Dataset& ds, const nn::EncoderModel& enc,
                            const nn::DecoderModel& dec) {
    Dataset recon = ds;
    for (chanmodel::DatasetEntry& e : recon.entries) {
        for (int t = 0; t < ds.scene.n_times; ++t) {
            const Eigen::RowVectorXd f =
                enc.encode(channel_to_image(e.channel, t, ds.norm_scale));
            const std::vector<Eigen::MatrixXcd> slices = image_to_channel(
                dec.decode(f), e.channel.n_rx(), e.channel.n_tx(), ds.norm_scale);
            for (int k = 0; k < ds.scene.n_subcarriers; ++k)
                e.channel.at(t, k) = slices[static_cast<std::size_t>(k)];
        }
    }
    return recon;
}

Eigen::VectorXd mean_representation(const std::vector<Representation>& reps) {
    if (reps.empty()) throw std::invalid_argument("mean_representation: empty set");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(reps.front().f.size());
    for (const Representation& r : reps) {
        if (r.f.size() != acc.size())
            throw std::invalid_argument("mean_representation: width mismatch");
        acc += r.f;
    }
    return acc / static_cast<double>(reps.size());
}

} // namespace chanrep::replearn
