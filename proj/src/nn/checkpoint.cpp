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

#include "chanrep/nn/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <vector>

namespace chanrep::nn {

void save_checkpoint(const ParamSet& params, const std::string& base,
                     const std::function<bool(const Param&)>& skip) {
    std::ofstream bin(base + ".bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("save_checkpoint: cannot open " + base + ".bin");

    nlohmann::json manifest = nlohmann::json::array();
    std::size_t offset = 0;
    for (const Param& p : params.items()) {
        if (skip && skip(p)) continue;
        manifest.push_back({{"name", p.name},
                            {"shape", {p.value.rows(), p.value.cols()}},
                            {"offset", offset}});
        for (Eigen::Index i = 0; i < p.value.rows(); ++i)
            for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
                const float v = static_cast<float>(p.value(i, j));
                bin.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        offset += static_cast<std::size_t>(p.value.size()) * sizeof(float);
    }
    if (!bin) throw std::runtime_error("save_checkpoint: write failed");
    bin.close();

    std::ofstream js(base + ".json", std::ios::trunc);
    if (!js) throw std::runtime_error("save_checkpoint: cannot open " + base + ".json");
    js << manifest.dump(2) << "\n";
}

void load_checkpoint(ParamSet& params, const std::string& base) {
    std::ifstream js(base + ".json");
    if (!js) throw std::runtime_error("load_checkpoint: manifest missing: " + base + ".json");
    nlohmann::json manifest;
    js >> manifest;

    std::ifstream bin(base + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("load_checkpoint: data missing: " + base + ".bin");

    for (const nlohmann::json& rec : manifest) {
        const std::string name = rec.at("name").get<std::string>();
        const Eigen::Index rows = rec.at("shape")[0].get<Eigen::Index>();
        const Eigen::Index cols = rec.at("shape")[1].get<Eigen::Index>();
        if (!params.contains(name))
            throw std::runtime_error("load_checkpoint: unexpected array " + name);
        Param& p = params.at(name);
        if (p.value.rows() != rows || p.value.cols() != cols)
            throw std::runtime_error("load_checkpoint: shape mismatch for " + name);

        bin.seekg(static_cast<std::streamoff>(rec.at("offset").get<std::size_t>()));
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) {
                float v = 0.0f;
                bin.read(reinterpret_cast<char*>(&v), sizeof(v));
                if (!bin) throw std::runtime_error("load_checkpoint: truncated data file");
                p.value(i, j) = static_cast<double>(v);
            }
    }
}

bool checkpoint_exists(const std::string& base) {
    return std::filesystem::exists(base + ".bin") && std::filesystem::exists(base + ".json");
}

} // namespace chanrep::nn
