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

#include "chanrep/latentgen.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace chanrep::latentgen {

void DiffusionSchedule::validate() const {
    if (n_steps < 1) throw std::invalid_argument("DiffusionSchedule: n_steps must be >= 1");
    if (delta.size() != n_steps || alpha.size() != n_steps || alpha_bar.size() != n_steps ||
        delta_tilde.size() != n_steps)
        throw std::invalid_argument("DiffusionSchedule: table sizes mismatch");
    for (int s = 1; s <= n_steps; ++s) {
        if (!(delta_at(s) > 0.0) || !(delta_at(s) < 1.0))
            throw std::invalid_argument("DiffusionSchedule: delta must lie in (0, 1)");
        if (s > 1 && !(alpha_bar_at(s) < alpha_bar_at(s - 1)))
            throw std::invalid_argument("DiffusionSchedule: alpha_bar must strictly decrease");
    }
}

DiffusionSchedule make_schedule(int n_steps, double intercept, double slope) {
    if (n_steps < 1) throw std::invalid_argument("make_schedule: n_steps must be >= 1");
    DiffusionSchedule sched;
    sched.n_steps = n_steps;
    sched.delta.resize(n_steps);
    sched.alpha.resize(n_steps);
    sched.alpha_bar.resize(n_steps);
    sched.delta_tilde.resize(n_steps);
    double running = 1.0;
    for (int s = 1; s <= n_steps; ++s) {
        const double d = intercept + slope * s;
        if (!(d > 0.0) || !(d < 1.0))
            throw std::invalid_argument("make_schedule: delta outside (0, 1) at step " +
                                        std::to_string(s));
        const double prev_bar = running;
        sched.delta(s - 1) = d;
        sched.alpha(s - 1) = 1.0 - d;
        running *= 1.0 - d;
        sched.alpha_bar(s - 1) = running;
        sched.delta_tilde(s - 1) = (1.0 - prev_bar) / (1.0 - running) * d;
    }
    sched.validate();
    return sched;
}

Eigen::RowVectorXd forward_sample(const Eigen::RowVectorXd& f0, int s,
                                  const Eigen::RowVectorXd& noise,
                                  const DiffusionSchedule& sched) {
    if (s < 1 || s > sched.n_steps) throw std::out_of_range("forward_sample: step out of range");
    if (noise.size() != f0.size())
        throw std::invalid_argument("forward_sample: noise shape mismatch");
    const double ab = sched.alpha_bar_at(s);
    return std::sqrt(ab) * f0 + std::sqrt(1.0 - ab) * noise;
}

Eigen::RowVectorXd posterior_mean_from_x0(const Eigen::RowVectorXd& f_s,
                                          const Eigen::RowVectorXd& f0, int s,
                                          const DiffusionSchedule& sched) {
    if (s < 1 || s > sched.n_steps)
        throw std::out_of_range("posterior_mean: step out of range");
    if (f0.size() != f_s.size()) throw std::invalid_argument("posterior_mean: shape mismatch");
    const double ab = sched.alpha_bar_at(s);
    const double ab_prev = sched.alpha_bar_at(s - 1);
    const double a = sched.alpha_at(s);
    const double d = sched.delta_at(s);
    return (std::sqrt(a) * (1.0 - ab_prev) / (1.0 - ab)) * f_s +
           (std::sqrt(ab_prev) * d / (1.0 - ab)) * f0;
}

Eigen::RowVectorXd posterior_mean_from_noise(const Eigen::RowVectorXd& f_s,
                                             const Eigen::RowVectorXd& noise, int s,
                                             const DiffusionSchedule& sched) {
    if (s < 1 || s > sched.n_steps)
        throw std::out_of_range("posterior_mean: step out of range");
    if (noise.size() != f_s.size()) throw std::invalid_argument("posterior_mean: shape mismatch");
    const double ab = sched.alpha_bar_at(s);
    const double a = sched.alpha_at(s);
    const double d = sched.delta_at(s);
    return (f_s - (d / std::sqrt(1.0 - ab)) * noise) / std::sqrt(a);
}

replearn::TrainResult train_generator(const std::vector<Representation>& reps,
                                      const std::vector<Eigen::Vector3d>& locs,
                                      nn::NoiseNetModel& model, const GeneratorConfig& cfg) {
    if (reps.empty()) throw std::invalid_argument("train_generator: empty dataset");
    if (reps.size() != locs.size())
        throw std::invalid_argument("train_generator: representation/location count mismatch");
    if (cfg.batch_size < 1 || cfg.steps < 1 || !(cfg.learning_rate > 0.0))
        throw std::invalid_argument("train_generator: bad config");
    const DiffusionSchedule sched = cfg.schedule();
    const int dim = model.cfg.n_re;
    for (const Representation& r : reps)
        if (r.f.size() != dim)
            throw std::invalid_argument("train_generator: representation width mismatch");

    // fit the standardization constants stored with the model
    Eigen::RowVectorXd f_mean = Eigen::RowVectorXd::Zero(dim);
    for (const Representation& r : reps) f_mean += r.f.transpose();
    f_mean /= static_cast<double>(reps.size());
    Eigen::RowVectorXd f_var = Eigen::RowVectorXd::Zero(dim);
    for (const Representation& r : reps)
        f_var += (r.f.transpose() - f_mean).array().square().matrix();
    f_var /= static_cast<double>(reps.size());
    model.latent_mean->value.row(0) = f_mean;
    model.latent_std->value.row(0) =
        (f_var.array().sqrt() + 1e-8).matrix();

    Eigen::RowVector3d l_mean = Eigen::RowVector3d::Zero();
    for (const Eigen::Vector3d& l : locs) l_mean += l.transpose();
    l_mean /= static_cast<double>(locs.size());
    Eigen::RowVector3d l_var = Eigen::RowVector3d::Zero();
    for (const Eigen::Vector3d& l : locs)
        l_var += (l.transpose() - l_mean).array().square().matrix();
    l_var /= static_cast<double>(locs.size());
    model.loc_mean->value.row(0) = l_mean;
    model.loc_std->value.row(0) = (l_var.array().sqrt() + 1e-8).matrix();

    std::vector<Eigen::RowVectorXd> z_latents;
    z_latents.reserve(reps.size());
    for (const Representation& r : reps)
        z_latents.push_back(model.standardize_latent(r.f.transpose()));

    nn::Adam adam;
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x9e4));
    std::uniform_int_distribution<std::size_t> pick(0, reps.size() - 1);
    std::uniform_int_distribution<int> pick_s(1, sched.n_steps);
    std::normal_distribution<double> gauss(0.0, 1.0);

    replearn::TrainResult result;
    for (int step = 1; step <= cfg.steps; ++step) {
        const double lr = nn::warmup_lr(cfg.learning_rate, step, cfg.steps, cfg.warmup_frac);
        nn::Tape t;
        std::vector<nn::Var> losses;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const std::size_t i = pick(rng);
            const int s = pick_s(rng);
            Eigen::RowVectorXd z(dim);
            for (int j = 0; j < dim; ++j) z(j) = gauss(rng);
            const Eigen::RowVectorXd noisy = forward_sample(z_latents[i], s, z, sched);
            nn::Var pred = model.forward(t, t.constant(noisy), s, locs[i]);
            losses.push_back(nn::sum_sq(nn::sub(pred, t.constant(z))));
        }
        nn::Var loss = nn::scale(nn::sum_all(nn::vcat(losses)), 1.0 / cfg.batch_size);
        model.params.zero_grads();
        t.backward(loss);
        adam.step(model.params, lr);
        result.log.push_back({step, loss.value()(0, 0), lr, -1});
    }
    return result;
}

Mat sample(const Eigen::Vector3d& loc, int n, const nn::NoiseNetModel& model,
           const DiffusionSchedule& sched, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    sched.validate();
    const int dim = model.cfg.n_re;
    Mat out(n, dim);
    for (int i = 0; i < n; ++i) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::RowVectorXd f(dim);
        for (int j = 0; j < dim; ++j) f(j) = gauss(rng);
        for (int s = sched.n_steps; s >= 1; --s) {
            const Eigen::RowVectorXd eps = model.predict(f, s, loc);
            f = posterior_mean_from_noise(f, eps, s, sched);
            if (s > 1) {
                const double sd = std::sqrt(sched.delta_tilde_at(s));
                for (int j = 0; j < dim; ++j) f(j) += sd * gauss(rng);
            }
        }
        out.row(i) = model.destandardize_latent(f);
    }
    return out;
}

GeneratedRepresentative generate_representative(
    const Eigen::Vector3d& loc, int n_gen, const nn::NoiseNetModel& model,
    const DiffusionSchedule& sched, const nn::DecoderModel& decoder, double norm_scale,
    const chanmodel::ChannelTensor& eval_tensor, const precode::PrecoderSpec& spec,
    std::uint64_t seed) {
    const Mat latents = sample(loc, n_gen, model, sched, seed);
    GeneratedRepresentative best;
    best.score = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_gen; ++i) {
        precode::SubcarrierChannels rep = replearn::image_to_channel(
            decoder.decode(latents.row(i)), eval_tensor.n_rx(), eval_tensor.n_tx(), norm_scale);
        const double score = precode::task1(eval_tensor, rep, spec);
        if (score > best.score) {
            best.score = score;
            best.index = i;
            best.rep = std::move(rep);
        }
    }
    return best;
}

GeneratedRepresentative generate_representative_dual(
    const Eigen::Vector3d& loc1, const Eigen::Vector3d& loc2, int n_gen,
    const nn::NoiseNetModel& model, const DiffusionSchedule& sched,
    const nn::DecoderModel& decoder, double norm_scale,
    const chanmodel::ChannelTensor& eval_tensor1, const chanmodel::ChannelTensor& eval_tensor2,
    double noise_var, std::uint64_t seed) {
    const Mat lat1 = sample(loc1, n_gen, model, sched, mix_seed(seed, 1));
    const Mat lat2 = sample(loc2, n_gen, model, sched, mix_seed(seed, 2));
    GeneratedRepresentative best;
    best.score = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_gen; ++i) {
        const precode::SubcarrierChannels rep1 = replearn::image_to_channel(
            decoder.decode(lat1.row(i)), eval_tensor1.n_rx(), eval_tensor1.n_tx(), norm_scale);
        const precode::SubcarrierChannels rep2 = replearn::image_to_channel(
            decoder.decode(lat2.row(i)), eval_tensor2.n_rx(), eval_tensor2.n_tx(), norm_scale);
        precode::SubcarrierChannels stacked(rep1.size());
        for (std::size_t k = 0; k < rep1.size(); ++k)
            stacked[k] = precode::stack_dual(rep1[k], rep2[k]);
        const double score = precode::task2(eval_tensor1, eval_tensor2, stacked, noise_var);
        if (score > best.score) {
            best.score = score;
            best.index = i;
            best.rep = std::move(stacked);
        }
    }
    return best;
}

namespace {
constexpr char kLatMagic[8] = {'L', 'A', 'T', 'E', 'N', 'T', '0', '1'};
}

void save_latents(const Mat& latents, const Eigen::Vector3d& loc, std::uint64_t seed,
                  const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_latents: cannot open " + path);
    os.write(kLatMagic, sizeof(kLatMagic));
    const std::uint32_t n = static_cast<std::uint32_t>(latents.rows());
    const std::uint32_t dim = static_cast<std::uint32_t>(latents.cols());
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    os.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    for (Eigen::Index i = 0; i < latents.rows(); ++i)
        for (Eigen::Index j = 0; j < latents.cols(); ++j) {
            const float v = static_cast<float>(latents(i, j));
            os.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    if (!os) throw std::runtime_error("save_latents: write failed");
    os.close();

    nlohmann::json meta{{"loc", {loc(0), loc(1), loc(2)}},
                        {"seed", seed},
                        {"n_gen", latents.rows()}};
    std::ofstream js(path + ".json", std::ios::trunc);
    js << meta.dump(2) << "\n";
}

Mat load_latents(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_latents: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kLatMagic, sizeof(kLatMagic)) != 0)
        throw std::runtime_error("load_latents: bad magic");
    std::uint32_t n = 0, dim = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    is.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (!is) throw std::runtime_error("load_latents: truncated header");
    Mat out(n, dim);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < dim; ++j) {
            float v = 0.0f;
            is.read(reinterpret_cast<char*>(&v), sizeof(v));
            if (!is) throw std::runtime_error("load_latents: truncated payload");
            out(i, j) = static_cast<double>(v);
        }
    return out;
}

} // namespace chanrep::latentgen
