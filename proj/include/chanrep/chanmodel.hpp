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

#ifndef CHANREP_CHANMODEL_HPP
#define CHANREP_CHANMODEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "chanrep/common.hpp"

namespace chanrep::chanmodel {

// BS antennas form an n_x * n_y * n_z panel, the UE a uniform linear array of
// n_r elements. phase_const is the product of wavenumber and element spacing
// (dimensionless radians); pi corresponds to half-wavelength spacing.
struct ArrayGeometry {
    int n_x = 1;
    int n_y = 1;
    int n_z = 1;
    int n_r = 1;
    double phase_const = 3.14159265358979323846;

    int n_tx() const { return n_x * n_y * n_z; }
    void validate() const; // throws std::invalid_argument
};

// One multipath component: gain in linear power units, phase in radians,
// delay in seconds, arrival angle at the UE and departure angles at the BS.
struct Path {
    double gain = 1.0;
    double phase = 0.0;
    double delay = 0.0;
    double aoa = 0.0;
    double aod_az = 0.0;
    double aod_el = 0.0;
};

// Multipath parameters of one (BS, UE, time) link.
struct PathSet {
    std::vector<Path> paths;
    int bs_id = 0;
    int ue_id = 0;
    int t_index = 0;

    void validate() const;
    void sort_by_gain(); // descending, stable
};

struct SceneConfig {
    int n_subcarriers = 16;     // N_k
    double bandwidth_hz = 1.92e6;
    int n_times = 8;            // N_t
    ArrayGeometry geometry;
    double noise_var = 0.1;     // sigma_n^2
    std::uint64_t rng_seed = 1;

    void validate() const;
};

// Complex channel over (time, subcarrier, rx-antenna, tx-antenna). Slices are
// stored t-major then k; at(t, k) is the N_R x N_T matrix of that instant.
class ChannelTensor {
public:
    ChannelTensor() = default;
    ChannelTensor(int n_times, int n_subcarriers, int n_rx, int n_tx);

    Eigen::MatrixXcd& at(int t, int k);
    const Eigen::MatrixXcd& at(int t, int k) const;

    int n_times() const { return n_t_; }
    int n_subcarriers() const { return n_k_; }
    int n_rx() const { return n_r_; }
    int n_tx() const { return n_tx_; }
    bool empty() const { return slices_.empty(); }

    // Sum of |h|^2 over the (k, r, tx) entries of one time slice.
    double slice_squared_norm(int t) const;

    Eigen::Vector3d loc = Eigen::Vector3d::Zero();

private:
    int n_t_ = 0, n_k_ = 0, n_r_ = 0, n_tx_ = 0;
    std::vector<Eigen::MatrixXcd> slices_;
};

struct DatasetEntry {
    int bs_id = 0;
    int ue_id = 0;
    ChannelTensor channel;
};

// norm_scale is the RMS magnitude of all channel entries; dividing by it
// yields the unit-scale tensors consumed by the networks. Channels are kept
// at physical scale so that SE and NMSE are computed on unnormalized data.
struct Dataset {
    std::vector<DatasetEntry> entries;
    SceneConfig scene;
    double norm_scale = 1.0;

    const DatasetEntry* find(int bs_id, int ue_id) const;
    std::vector<int> ue_ids() const;  // sorted unique
    std::vector<int> bs_ids() const;  // sorted unique
};

// Array response vectors (unit-modulus phase profiles).
Eigen::VectorXcd array_response_ue(const ArrayGeometry& geometry, double aoa);
Eigen::VectorXcd array_response_bs(const ArrayGeometry& geometry, double aod_az, double aod_el);

// Channel of one (t, k) instant. Each path contributes
//   sqrt(gain/N_k) * exp(j(phase + 2 pi k delay B / N_k)) * a_ue(aoa) * a_bs(az, el)^H
// evaluated at the path's own stored angles; a set whose paths share one
// angle triple reproduces the single-cluster closed form, and multi-cluster
// links are the linear superposition of such sets.
Eigen::MatrixXcd synth_subcarrier(const PathSet& paths, const SceneConfig& scene, int k);

// Stacks synth_subcarrier over k and t. path_sets must hold t_index 0..N_t-1
// exactly once each (any order).
ChannelTensor synth_tensor(const std::vector<PathSet>& path_sets, const SceneConfig& scene,
                           const Eigen::Vector3d& loc);

// Temporal variation at a fixed geolocation: phases redrawn, gains jittered
// by a unit-mean log-normal factor, delays jittered by a truncated Gaussian.
// Angles (and thus the dominant path direction) stay fixed.
struct JitterConfig {
    double gain_sigma = 0.1;
    double delay_sigma = 5e-8;
    bool redraw_phase = true;
    std::uint64_t seed = 1;
};

PathSet perturb_temporal(const PathSet& base, int t_index, const JitterConfig& jitter);

// Synthetic stand-in for ray tracing: UE locations on a 2-D grid, dominant
// path pointing from BS to UE, weaker scattered paths around it.
struct SceneSamplerConfig {
    int n_paths = 6;
    double area_size = 200.0;       // UEs on a grid in [0, area_size]^2
    double ue_height = 1.5;
    double bs_height = 25.0;
    double gain_log_sigma = 1.0;    // log-normal path gains
    double delay_mean = 5e-7;       // exponential delays, seconds
    double angle_jitter_sigma = 0.3;
    JitterConfig jitter;            // temporal model for t >= 1
};

struct LocationPaths {
    Eigen::Vector3d ue_pos;
    std::vector<std::vector<PathSet>> paths; // [bs][t]
};

struct SampledScene {
    std::vector<Eigen::Vector3d> bs_pos;
    std::vector<LocationPaths> locations;
};

SampledScene sample_scene(const SceneConfig& scene, const SceneSamplerConfig& sampler,
                          int n_locations, int n_bs);

// sample_scene + synth_tensor + norm_scale, keyed by (bs_id, ue_id) with
// loc = ue_pos - bs_pos.
Dataset build_dataset(const SceneConfig& scene, const SceneSamplerConfig& sampler,
                      int n_locations, int n_bs);

double compute_norm_scale(const Dataset& ds); // RMS entry magnitude

// Binary dataset format "CRT1":
//   8-byte magic "CRTENS01"
//   little-endian u32 N_loc, N_t, N_k, N_R, N_T
//   f64 norm_scale
//   per entry: f64 loc[3], then N_t*N_k*N_R*N_T complex values as
//   (f64 re, f64 im), index order t-major then k, r, tx.
// A sidecar JSON at <path>.json carries the scene config, rng seed and the
// (bs_id, ue_id) keys in entry order.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Ray-path CSV import. Expected header (exact names, any order is rejected):
//   bs_id,ue_id,t,loc_x,loc_y,loc_z,gain_lin,phase_rad,delay_s,aoa_deg,aod_az_deg,aod_el_deg
// One PathSet per (bs_id, ue_id, t) group; angles converted to radians; t
// values remapped to consecutive indices in ascending order.
struct RayPathGroup {
    int bs_id = 0;
    int ue_id = 0;
    Eigen::Vector3d loc = Eigen::Vector3d::Zero();
    std::vector<PathSet> path_sets; // one per t, t_index 0..N_t-1
};

std::vector<RayPathGroup> import_raypaths_csv(const std::string& path);

// Synthesizes the imported groups into a dataset; every group must cover the
// same number of time instants. scene.n_times is overwritten by the data.
Dataset dataset_from_raypaths(const std::vector<RayPathGroup>& groups, SceneConfig scene);

// JSON mapping used by the dataset sidecar and the experiment config.
nlohmann::json scene_to_json(const SceneConfig& scene);
SceneConfig scene_from_json(const nlohmann::json& j);
nlohmann::json sampler_to_json(const SceneSamplerConfig& sampler);
SceneSamplerConfig sampler_from_json(const nlohmann::json& j);

} // namespace chanrep::chanmodel

#endif
