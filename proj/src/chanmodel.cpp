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

#include "chanrep/chanmodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "dataset format is little-endian; byte swapping is not implemented");

namespace chanrep::chanmodel {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

const std::complex<double> kImag(0.0, 1.0);

// Unit-mean log-normal factor: exp(N(-sigma^2/2, sigma^2)).
double lognormal_unit_mean(std::mt19937_64& rng, double sigma) {
    std::normal_distribution<double> normal(-0.5 * sigma * sigma, sigma);
    return std::exp(normal(rng));
}

} // namespace

void ArrayGeometry::validate() const {
    if (n_x < 1 || n_y < 1 || n_z < 1)
        throw std::invalid_argument("ArrayGeometry: antenna counts per axis must be >= 1");
    if (n_r < 1)
        throw std::invalid_argument("ArrayGeometry: UE antenna count must be >= 1");
    if (!(phase_const > 0.0))
        throw std::invalid_argument("ArrayGeometry: phase_const must be positive");
}

void PathSet::validate() const {
    if (paths.empty())
        throw std::invalid_argument("PathSet: at least one path required");
    for (const Path& p : paths) {
        if (!(p.gain >= 0.0) || !std::isfinite(p.gain))
            throw std::invalid_argument("PathSet: gains must be finite and >= 0");
        if (!(p.delay >= 0.0))
            throw std::invalid_argument("PathSet: delays must be >= 0");
        if (!std::isfinite(p.phase) || !std::isfinite(p.aoa) || !std::isfinite(p.aod_az) ||
            !std::isfinite(p.aod_el))
            throw std::invalid_argument("PathSet: angles and phases must be finite");
    }
    if (t_index < 0)
        throw std::invalid_argument("PathSet: t_index must be >= 0");
}

void PathSet::sort_by_gain() {
    std::stable_sort(paths.begin(), paths.end(),
                     [](const Path& a, const Path& b) { return a.gain > b.gain; });
}

void SceneConfig::validate() const {
    if (n_subcarriers < 1)
        throw std::invalid_argument("SceneConfig: n_subcarriers must be >= 1");
    if (!(bandwidth_hz > 0.0))
        throw std::invalid_argument("SceneConfig: bandwidth must be positive");
    if (n_times < 1)
        throw std::invalid_argument("SceneConfig: n_times must be >= 1");
    if (!(noise_var > 0.0))
        throw std::invalid_argument("SceneConfig: noise variance must be positive");
    geometry.validate();
}

ChannelTensor::ChannelTensor(int n_times, int n_subcarriers, int n_rx, int n_tx)
    : n_t_(n_times), n_k_(n_subcarriers), n_r_(n_rx), n_tx_(n_tx) {
    if (n_times < 1 || n_subcarriers < 1 || n_rx < 1 || n_tx < 1)
        throw std::invalid_argument("ChannelTensor: all dimensions must be >= 1");
    slices_.assign(static_cast<std::size_t>(n_times) * n_subcarriers,
                   Eigen::MatrixXcd::Zero(n_rx, n_tx));
}

Eigen::MatrixXcd& ChannelTensor::at(int t, int k) {
    if (t < 0 || t >= n_t_ || k < 0 || k >= n_k_)
        throw std::out_of_range("ChannelTensor::at: index out of range");
    return slices_[static_cast<std::size_t>(t) * n_k_ + k];
}

const Eigen::MatrixXcd& ChannelTensor::at(int t, int k) const {
    if (t < 0 || t >= n_t_ || k < 0 || k >= n_k_)
        throw std::out_of_range("ChannelTensor::at: index out of range");
    return slices_[static_cast<std::size_t>(t) * n_k_ + k];
}

double ChannelTensor::slice_squared_norm(int t) const {
    double acc = 0.0;
    for (int k = 0; k < n_k_; ++k) acc += at(t, k).squaredNorm();
    return acc;
}

const DatasetEntry* Dataset::find(int bs_id, int ue_id) const {
    for (const DatasetEntry& e : entries)
        if (e.bs_id == bs_id && e.ue_id == ue_id) return &e;
    return nullptr;
}

std::vector<int> Dataset::ue_ids() const {
    std::set<int> ids;
    for (const DatasetEntry& e : entries) ids.insert(e.ue_id);
    return {ids.begin(), ids.end()};
}

std::vector<int> Dataset::bs_ids() const {
    std::set<int> ids;
    for (const DatasetEntry& e : entries) ids.insert(e.bs_id);
    return {ids.begin(), ids.end()};
}

Eigen::VectorXcd array_response_ue(const ArrayGeometry& geometry, double aoa) {
    geometry.validate();
    Eigen::VectorXcd a(geometry.n_r);
    const double step = geometry.phase_const * std::cos(aoa);
    for (int m = 0; m < geometry.n_r; ++m) a(m) = std::exp(kImag * (step * m));
    return a;
}

Eigen::VectorXcd array_response_bs(const ArrayGeometry& geometry, double aod_az, double aod_el) {
    geometry.validate();
    const double kd = geometry.phase_const;
    const double px = kd * std::sin(aod_el) * std::cos(aod_az);
    const double py = kd * std::sin(aod_el) * std::sin(aod_az);
    const double pz = kd * std::cos(aod_el);

    auto axis = [](int n, double phase_step) {
        Eigen::VectorXcd v(n);
        for (int m = 0; m < n; ++m) v(m) = std::exp(kImag * (phase_step * m));
        return v;
    };
    const Eigen::VectorXcd ax = axis(geometry.n_x, px);
    const Eigen::VectorXcd ay = axis(geometry.n_y, py);
    const Eigen::VectorXcd az = axis(geometry.n_z, pz);

    // a_z (x) a_y (x) a_x
    Eigen::VectorXcd out(geometry.n_tx());
    int idx = 0;
    for (int iz = 0; iz < geometry.n_z; ++iz)
        for (int iy = 0; iy < geometry.n_y; ++iy)
            for (int ix = 0; ix < geometry.n_x; ++ix) out(idx++) = az(iz) * ay(iy) * ax(ix);
    return out;
}

Eigen::MatrixXcd synth_subcarrier(const PathSet& paths, const SceneConfig& scene, int k) {
    scene.validate();
    paths.validate();
    if (k < 0 || k >= scene.n_subcarriers)
        throw std::out_of_range("synth_subcarrier: subcarrier index out of range");

    const int n_k = scene.n_subcarriers;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(scene.geometry.n_r, scene.geometry.n_tx());
    for (const Path& p : paths.paths) {
        const std::complex<double> coeff =
            std::sqrt(p.gain / n_k) *
            std::exp(kImag * (p.phase + kTwoPi * k * p.delay * scene.bandwidth_hz / n_k));
        const Eigen::VectorXcd a_ue = array_response_ue(scene.geometry, p.aoa);
        const Eigen::VectorXcd a_bs = array_response_bs(scene.geometry, p.aod_az, p.aod_el);
        h.noalias() += coeff * (a_ue * a_bs.adjoint());
    }
    return h;
}

ChannelTensor synth_tensor(const std::vector<PathSet>& path_sets, const SceneConfig& scene,
                           const Eigen::Vector3d& loc) {
    scene.validate();
    if (static_cast<int>(path_sets.size()) != scene.n_times)
        throw std::invalid_argument("synth_tensor: need exactly one PathSet per time instant");

    std::vector<const PathSet*> by_t(scene.n_times, nullptr);
    for (const PathSet& ps : path_sets) {
        if (ps.t_index < 0 || ps.t_index >= scene.n_times)
            throw std::invalid_argument("synth_tensor: t_index out of range");
        if (by_t[ps.t_index] != nullptr)
            throw std::invalid_argument("synth_tensor: duplicate t_index");
        by_t[ps.t_index] = &ps;
    }

    ChannelTensor out(scene.n_times, scene.n_subcarriers, scene.geometry.n_r,
                      scene.geometry.n_tx());
    out.loc = loc;
    for (int t = 0; t < scene.n_times; ++t)
        for (int k = 0; k < scene.n_subcarriers; ++k)
            out.at(t, k) = synth_subcarrier(*by_t[t], scene, k);
    return out;
}

PathSet perturb_temporal(const PathSet& base, int t_index, const JitterConfig& jitter) {
    base.validate();
    if (jitter.gain_sigma < 0.0 || jitter.delay_sigma < 0.0)
        throw std::invalid_argument("perturb_temporal: jitter magnitudes must be >= 0");

    std::mt19937_64 rng(stream_seed(jitter.seed, static_cast<std::uint64_t>(base.bs_id),
                                    static_cast<std::uint64_t>(base.ue_id),
                                    static_cast<std::uint64_t>(t_index)));
    std::uniform_real_distribution<double> uniform_phase(0.0, kTwoPi);

    PathSet out = base;
    out.t_index = t_index;
    for (Path& p : out.paths) {
        if (jitter.redraw_phase) p.phase = uniform_phase(rng);
        if (jitter.gain_sigma > 0.0) p.gain *= lognormal_unit_mean(rng, jitter.gain_sigma);
        if (jitter.delay_sigma > 0.0) {
            std::normal_distribution<double> dn(0.0, jitter.delay_sigma);
            p.delay = std::max(0.0, p.delay + dn(rng));
        }
    }
    return out;
}

SampledScene sample_scene(const SceneConfig& scene, const SceneSamplerConfig& sampler,
                          int n_locations, int n_bs) {
    scene.validate();
    if (n_locations < 1) throw std::invalid_argument("sample_scene: n_locations must be >= 1");
    if (n_bs < 1) throw std::invalid_argument("sample_scene: n_bs must be >= 1");
    if (sampler.n_paths < 1) throw std::invalid_argument("sample_scene: n_paths must be >= 1");

    SampledScene out;

    // BSs evenly spaced on a circle around the UE grid.
    const double cx = 0.5 * sampler.area_size, cy = 0.5 * sampler.area_size;
    const double radius = 0.75 * sampler.area_size;
    for (int b = 0; b < n_bs; ++b) {
        const double ang = kTwoPi * b / std::max(1, n_bs);
        out.bs_pos.emplace_back(cx + radius * std::cos(ang), cy + radius * std::sin(ang),
                                sampler.bs_height);
    }

    // UEs on a near-square grid covering the area.
    const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_locations))));
    const double cell = sampler.area_size / grid;

    JitterConfig jitter = sampler.jitter;
    jitter.seed = scene.rng_seed;

    for (int u = 0; u < n_locations; ++u) {
        LocationPaths lp;
        const int gi = u / grid, gj = u % grid;
        lp.ue_pos = Eigen::Vector3d((gj + 0.5) * cell, (gi + 0.5) * cell, sampler.ue_height);
        lp.paths.resize(n_bs);

        for (int b = 0; b < n_bs; ++b) {
            std::mt19937_64 rng(stream_seed(scene.rng_seed, static_cast<std::uint64_t>(b),
                                            static_cast<std::uint64_t>(u),
                                            0xba5eULL));
            std::uniform_real_distribution<double> uniform_phase(0.0, kTwoPi);
            std::exponential_distribution<double> exp_delay(1.0 / sampler.delay_mean);
            std::normal_distribution<double> angle_jitter(0.0, sampler.angle_jitter_sigma);

            const Eigen::Vector3d d = (lp.ue_pos - out.bs_pos[b]).normalized();
            const double az = std::atan2(d.y(), d.x());
            const double el = std::acos(std::clamp(d.z(), -1.0, 1.0));
            const Eigen::Vector3d back = -d;
            const double aoa = std::acos(std::clamp(back.x(), -1.0, 1.0));

            std::vector<double> gains(sampler.n_paths);
            for (double& g : gains) {
                std::normal_distribution<double> ln(0.0, sampler.gain_log_sigma);
                g = std::exp(ln(rng));
            }
            std::sort(gains.begin(), gains.end(), std::greater<double>());

            PathSet base;
            base.bs_id = b;
            base.ue_id = u;
            base.t_index = 0;
            for (int l = 0; l < sampler.n_paths; ++l) {
                Path p;
                p.gain = gains[l];
                p.phase = uniform_phase(rng);
                p.delay = exp_delay(rng);
                if (l == 0) {
                    p.aoa = aoa;
                    p.aod_az = az;
                    p.aod_el = el;
                } else {
                    p.aoa = aoa + angle_jitter(rng);
                    p.aod_az = az + angle_jitter(rng);
                    p.aod_el = el + angle_jitter(rng);
                }
                base.paths.push_back(p);
            }

            lp.paths[b].push_back(base);
            for (int t = 1; t < scene.n_times; ++t)
                lp.paths[b].push_back(perturb_temporal(base, t, jitter));
        }
        out.locations.push_back(std::move(lp));
    }
    return out;
}

Dataset build_dataset(const SceneConfig& scene, const SceneSamplerConfig& sampler,
                      int n_locations, int n_bs) {
    const SampledScene sampled = sample_scene(scene, sampler, n_locations, n_bs);
    Dataset ds;
    ds.scene = scene;
    for (int u = 0; u < n_locations; ++u) {
        const LocationPaths& lp = sampled.locations[u];
        for (int b = 0; b < n_bs; ++b) {
            DatasetEntry e;
            e.bs_id = b;
            e.ue_id = u;
            e.channel = synth_tensor(lp.paths[b], scene, lp.ue_pos - sampled.bs_pos[b]);
            ds.entries.push_back(std::move(e));
        }
    }
    ds.norm_scale = compute_norm_scale(ds);
    return ds;
}

double compute_norm_scale(const Dataset& ds) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const DatasetEntry& e : ds.entries) {
        for (int t = 0; t < e.channel.n_times(); ++t) acc += e.channel.slice_squared_norm(t);
        count += static_cast<std::size_t>(e.channel.n_times()) * e.channel.n_subcarriers() *
                 e.channel.n_rx() * e.channel.n_tx();
    }
    if (count == 0 || acc <= 0.0) return 1.0;
    return std::sqrt(acc / static_cast<double>(count));
}

namespace {

constexpr char kMagic[8] = {'C', 'R', 'T', 'E', 'N', 'S', '0', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("dataset file truncated");
    return v;
}

double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("dataset file truncated");
    return v;
}

} // namespace

nlohmann::json scene_to_json(const SceneConfig& s) {
    return nlohmann::json{{"n_subcarriers", s.n_subcarriers},
                          {"bandwidth_hz", s.bandwidth_hz},
                          {"n_times", s.n_times},
                          {"noise_var", s.noise_var},
                          {"rng_seed", s.rng_seed},
                          {"geometry",
                           {{"n_x", s.geometry.n_x},
                            {"n_y", s.geometry.n_y},
                            {"n_z", s.geometry.n_z},
                            {"n_r", s.geometry.n_r},
                            {"phase_const", s.geometry.phase_const}}}};
}

SceneConfig scene_from_json(const nlohmann::json& j) {
    SceneConfig s;
    s.n_subcarriers = j.at("n_subcarriers").get<int>();
    s.bandwidth_hz = j.at("bandwidth_hz").get<double>();
    s.n_times = j.at("n_times").get<int>();
    s.noise_var = j.at("noise_var").get<double>();
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    const nlohmann::json& g = j.at("geometry");
    s.geometry.n_x = g.at("n_x").get<int>();
    s.geometry.n_y = g.at("n_y").get<int>();
    s.geometry.n_z = g.at("n_z").get<int>();
    s.geometry.n_r = g.at("n_r").get<int>();
    s.geometry.phase_const = g.at("phase_const").get<double>();
    s.validate();
    return s;
}

nlohmann::json sampler_to_json(const SceneSamplerConfig& c) {
    return nlohmann::json{{"n_paths", c.n_paths},
                          {"area_size", c.area_size},
                          {"ue_height", c.ue_height},
                          {"bs_height", c.bs_height},
                          {"gain_log_sigma", c.gain_log_sigma},
                          {"delay_mean", c.delay_mean},
                          {"angle_jitter_sigma", c.angle_jitter_sigma},
                          {"jitter",
                           {{"gain_sigma", c.jitter.gain_sigma},
                            {"delay_sigma", c.jitter.delay_sigma},
                            {"redraw_phase", c.jitter.redraw_phase}}}};
}

SceneSamplerConfig sampler_from_json(const nlohmann::json& j) {
    SceneSamplerConfig c;
    c.n_paths = j.value("n_paths", c.n_paths);
    c.area_size = j.value("area_size", c.area_size);
    c.ue_height = j.value("ue_height", c.ue_height);
    c.bs_height = j.value("bs_height", c.bs_height);
    c.gain_log_sigma = j.value("gain_log_sigma", c.gain_log_sigma);
    c.delay_mean = j.value("delay_mean", c.delay_mean);
    c.angle_jitter_sigma = j.value("angle_jitter_sigma", c.angle_jitter_sigma);
    if (j.contains("jitter")) {
        const nlohmann::json& jj = j.at("jitter");
        c.jitter.gain_sigma = jj.value("gain_sigma", c.jitter.gain_sigma);
        c.jitter.delay_sigma = jj.value("delay_sigma", c.jitter.delay_sigma);
        c.jitter.redraw_phase = jj.value("redraw_phase", c.jitter.redraw_phase);
    }
    return c;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    if (ds.entries.empty()) throw std::invalid_argument("save_dataset: empty dataset");
    const ChannelTensor& first = ds.entries.front().channel;
    for (const DatasetEntry& e : ds.entries) {
        if (e.channel.n_times() != first.n_times() ||
            e.channel.n_subcarriers() != first.n_subcarriers() ||
            e.channel.n_rx() != first.n_rx() || e.channel.n_tx() != first.n_tx())
            throw std::invalid_argument("save_dataset: entries have inconsistent shapes");
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_dataset: cannot open " + path);

    os.write(kMagic, sizeof(kMagic));
    write_u32(os, static_cast<std::uint32_t>(ds.entries.size()));
    write_u32(os, static_cast<std::uint32_t>(first.n_times()));
    write_u32(os, static_cast<std::uint32_t>(first.n_subcarriers()));
    write_u32(os, static_cast<std::uint32_t>(first.n_rx()));
    write_u32(os, static_cast<std::uint32_t>(first.n_tx()));
    write_f64(os, ds.norm_scale);

    for (const DatasetEntry& e : ds.entries) {
        for (int i = 0; i < 3; ++i) write_f64(os, e.channel.loc(i));
        for (int t = 0; t < first.n_times(); ++t)
            for (int k = 0; k < first.n_subcarriers(); ++k) {
                const Eigen::MatrixXcd& h = e.channel.at(t, k);
                for (int r = 0; r < first.n_rx(); ++r)
                    for (int c = 0; c < first.n_tx(); ++c) {
                        write_f64(os, h(r, c).real());
                        write_f64(os, h(r, c).imag());
                    }
            }
    }
    if (!os) throw std::runtime_error("save_dataset: write failed for " + path);
    os.close();

    nlohmann::json sidecar;
    sidecar["scene"] = scene_to_json(ds.scene);
    sidecar["norm_scale"] = ds.norm_scale;
    sidecar["seeds"] = {{"rng_seed", ds.scene.rng_seed}};
    nlohmann::json ids = nlohmann::json::array();
    for (const DatasetEntry& e : ds.entries)
        ids.push_back({{"bs_id", e.bs_id}, {"ue_id", e.ue_id}});
    sidecar["entries"] = ids;

    std::ofstream js(path + ".json", std::ios::trunc);
    if (!js) throw std::runtime_error("save_dataset: cannot open " + path + ".json");
    js << sidecar.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_dataset: cannot open " + path);

    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_dataset: bad magic, not a CRT1 dataset");

    const std::uint32_t n_loc = read_u32(is);
    const std::uint32_t n_t = read_u32(is);
    const std::uint32_t n_k = read_u32(is);
    const std::uint32_t n_r = read_u32(is);
    const std::uint32_t n_tx = read_u32(is);
    const double norm_scale = read_f64(is);
    if (n_loc == 0 || n_t == 0 || n_k == 0 || n_r == 0 || n_tx == 0)
        throw std::runtime_error("load_dataset: inconsistent shape header");

    std::ifstream js(path + ".json");
    if (!js) throw std::runtime_error("load_dataset: sidecar " + path + ".json missing");
    nlohmann::json sidecar;
    js >> sidecar;

    Dataset ds;
    ds.scene = scene_from_json(sidecar.at("scene"));
    ds.norm_scale = norm_scale;
    const nlohmann::json& ids = sidecar.at("entries");
    if (ids.size() != n_loc)
        throw std::runtime_error("load_dataset: sidecar entry count does not match header");

    for (std::uint32_t i = 0; i < n_loc; ++i) {
        DatasetEntry e;
        e.bs_id = ids[i].at("bs_id").get<int>();
        e.ue_id = ids[i].at("ue_id").get<int>();
        e.channel = ChannelTensor(static_cast<int>(n_t), static_cast<int>(n_k),
                                  static_cast<int>(n_r), static_cast<int>(n_tx));
        for (int d = 0; d < 3; ++d) e.channel.loc(d) = read_f64(is);
        for (std::uint32_t t = 0; t < n_t; ++t)
            for (std::uint32_t k = 0; k < n_k; ++k) {
                Eigen::MatrixXcd& h = e.channel.at(static_cast<int>(t), static_cast<int>(k));
                for (std::uint32_t r = 0; r < n_r; ++r)
                    for (std::uint32_t c = 0; c < n_tx; ++c) {
                        const double re = read_f64(is);
                        const double im = read_f64(is);
                        h(static_cast<int>(r), static_cast<int>(c)) = {re, im};
                    }
            }
        ds.entries.push_back(std::move(e));
    }
    return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim spaces and a possible trailing CR
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

} // namespace

std::vector<RayPathGroup> import_raypaths_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("import_raypaths_csv: cannot open " + path);

    static const std::vector<std::string> expected = {
        "bs_id",    "ue_id",     "t",       "loc_x",   "loc_y",       "loc_z",
        "gain_lin", "phase_rad", "delay_s", "aoa_deg", "aod_az_deg",  "aod_el_deg"};

    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error("import_raypaths_csv: empty file");
    if (split_csv_line(line) != expected)
        throw std::runtime_error("import_raypaths_csv: header does not match the ray-path schema");

    struct Key {
        int bs, ue;
        long long t;
        bool operator<(const Key& o) const {
            return std::tie(bs, ue, t) < std::tie(o.bs, o.ue, o.t);
        }
    };
    std::map<Key, PathSet> groups;
    std::map<std::pair<int, int>, Eigen::Vector3d> locs;

    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != expected.size())
            throw std::runtime_error("import_raypaths_csv: line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(expected.size()) + " fields");
        Key key{};
        Path p;
        Eigen::Vector3d loc;
        try {
            key.bs = std::stoi(f[0]);
            key.ue = std::stoi(f[1]);
            key.t = std::stoll(f[2]);
            loc = {std::stod(f[3]), std::stod(f[4]), std::stod(f[5])};
            p.gain = std::stod(f[6]);
            p.phase = std::stod(f[7]);
            p.delay = std::stod(f[8]);
            p.aoa = std::stod(f[9]) * kDegToRad;
            p.aod_az = std::stod(f[10]) * kDegToRad;
            p.aod_el = std::stod(f[11]) * kDegToRad;
        } catch (const std::exception&) {
            throw std::runtime_error("import_raypaths_csv: line " + std::to_string(line_no) +
                                     ": malformed value");
        }
        PathSet& ps = groups[key];
        ps.bs_id = key.bs;
        ps.ue_id = key.ue;
        ps.paths.push_back(p);
        locs[{key.bs, key.ue}] = loc;
    }
    if (groups.empty())
        throw std::runtime_error("import_raypaths_csv: no data rows");

    // Collect groups per (bs, ue) and remap t values to consecutive indices.
    std::map<std::pair<int, int>, std::vector<std::pair<long long, PathSet>>> by_link;
    for (auto& [key, ps] : groups)
        by_link[{key.bs, key.ue}].emplace_back(key.t, std::move(ps));

    std::vector<RayPathGroup> out;
    for (auto& [link, sets] : by_link) {
        RayPathGroup g;
        g.bs_id = link.first;
        g.ue_id = link.second;
        g.loc = locs[link];
        std::sort(sets.begin(), sets.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 0; i < sets.size(); ++i) {
            PathSet ps = std::move(sets[i].second);
            ps.t_index = static_cast<int>(i);
            ps.sort_by_gain();
            ps.validate();
            g.path_sets.push_back(std::move(ps));
        }
        out.push_back(std::move(g));
    }
    return out;
}

Dataset dataset_from_raypaths(const std::vector<RayPathGroup>& groups, SceneConfig scene) {
    if (groups.empty()) throw std::invalid_argument("dataset_from_raypaths: no groups");
    const int n_t = static_cast<int>(groups.front().path_sets.size());
    for (const RayPathGroup& g : groups)
        if (static_cast<int>(g.path_sets.size()) != n_t)
            throw std::invalid_argument(
                "dataset_from_raypaths: groups cover different time instant counts");
    scene.n_times = n_t;
    scene.validate();

    Dataset ds;
    ds.scene = scene;
    for (const RayPathGroup& g : groups) {
        DatasetEntry e;
        e.bs_id = g.bs_id;
        e.ue_id = g.ue_id;
        e.channel = synth_tensor(g.path_sets, scene, g.loc);
        ds.entries.push_back(std::move(e));
    }
    ds.norm_scale = compute_norm_scale(ds);
    return ds;
}

} // namespace chanrep::chanmodel
