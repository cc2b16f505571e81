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

#ifndef CHANREP_LATENTGEN_HPP
#define CHANREP_LATENTGEN_HPP

#include <string>
#include <vector>

#include "chanrep/precode.hpp"
#include "chanrep/replearn.hpp"

namespace chanrep::latentgen {

using nn::Mat;
using replearn::Representation;

// Per-step noise variances delta_s with alpha_s = 1 - delta_s, the running
// product alpha_bar_s (alpha_bar_0 = 1) and the posterior variances
// delta_tilde_s = (1 - alpha_bar_{s-1}) / (1 - alpha_bar_s) * delta_s.
// Vectors are 1-based through at(): at(delta, s) for s = 1..n_steps.
struct DiffusionSchedule {
    int n_steps = 0;
    Eigen::VectorXd delta;
    Eigen::VectorXd alpha;
    Eigen::VectorXd alpha_bar;   // index s; alpha_bar(0) corresponds to s = 1
    Eigen::VectorXd delta_tilde;

    double delta_at(int s) const { return delta(s - 1); }
    double alpha_at(int s) const { return alpha(s - 1); }
    double alpha_bar_at(int s) const { return s == 0 ? 1.0 : alpha_bar(s - 1); }
    double delta_tilde_at(int s) const { return delta_tilde(s - 1); }
    void validate() const;
};

// delta_s = intercept + slope * s for s = 1..n_steps.
DiffusionSchedule make_schedule(int n_steps, double intercept, double slope);

// F_s = sqrt(alpha_bar_s) F0 + sqrt(1 - alpha_bar_s) * noise
Eigen::RowVectorXd forward_sample(const Eigen::RowVectorXd& f0, int s,
                                  const Eigen::RowVectorXd& noise,
                                  const DiffusionSchedule& sched);

// Both closed forms of the reverse-process mean; they agree when `noise` is
// the noise that produced f_s from f0.
Eigen::RowVectorXd posterior_mean_from_x0(const Eigen::RowVectorXd& f_s,
                                          const Eigen::RowVectorXd& f0, int s,
                                          const DiffusionSchedule& sched);
Eigen::RowVectorXd posterior_mean_from_noise(const Eigen::RowVectorXd& f_s,
                                             const Eigen::RowVectorXd& noise, int s,
                                             const DiffusionSchedule& sched);

struct GeneratorConfig {
    int n_steps = 100;
    double delta_intercept = 1e-4;
    double delta_slope = 6e-4;
    int batch_size = 16;
    int steps = 4000;
    double learning_rate = 1e-3;
    double warmup_frac = 0.05;
    std::uint64_t seed = 1;

    DiffusionSchedule schedule() const {
        return make_schedule(n_steps, delta_intercept, delta_slope);
    }
};

// Noise-prediction training on standardized latents; location and latent
// standardization constants are fitted here and stored in the model.
replearn::TrainResult train_generator(const std::vector<Representation>& reps,
                                      const std::vector<Eigen::Vector3d>& locs,
                                      nn::NoiseNetModel& model, const GeneratorConfig& cfg);

// Ancestral sampling of n latents conditioned on loc; sample i uses an
// independent stream derived from (seed, i), so a shared seed yields a
// shared prefix across different n.
Mat sample(const Eigen::Vector3d& loc, int n, const nn::NoiseNetModel& model,
           const DiffusionSchedule& sched, std::uint64_t seed);

struct GeneratedRepresentative {
    int index = 0;
    double score = 0.0;
    precode::SubcarrierChannels rep;
};

// Best-of-n generation for the single-BS task: sample n latents, decode each
// to a channel, score against the stored evaluation tensor, keep the argmax
// (ties toward the first sample).
GeneratedRepresentative generate_representative(
    const Eigen::Vector3d& loc, int n_gen, const nn::NoiseNetModel& model,
    const DiffusionSchedule& sched, const nn::DecoderModel& decoder, double norm_scale,
    const chanmodel::ChannelTensor& eval_tensor, const precode::PrecoderSpec& spec,
    std::uint64_t seed);

// Joint two-BS variant: pairs of latents (one per BS location) are sampled
// with a shared stream prefix, decoded, stacked and scored jointly.
GeneratedRepresentative generate_representative_dual(
    const Eigen::Vector3d& loc1, const Eigen::Vector3d& loc2, int n_gen,
    const nn::NoiseNetModel& model, const DiffusionSchedule& sched,
    const nn::DecoderModel& decoder, double norm_scale,
    const chanmodel::ChannelTensor& eval_tensor1, const chanmodel::ChannelTensor& eval_tensor2,
    double noise_var, std::uint64_t seed);

// Generated-latent dump "LAT1": magic "LATENT01", little-endian u32 n and
// N_re, then n * N_re f32 values row-major; a JSON sidecar at <path>.json
// carries loc, seed and n_gen.
void save_latents(const Mat& latents, const Eigen::Vector3d& loc, std::uint64_t seed,
                  const std::string& path);
Mat load_latents(const std::string& path);

} // namespace chanrep::latentgen

#endif
