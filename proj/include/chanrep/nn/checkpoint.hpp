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

#ifndef CHANREP_NN_CHECKPOINT_HPP
#define CHANREP_NN_CHECKPOINT_HPP

#include <functional>
#include <string>

#include "chanrep/nn/params.hpp"

namespace chanrep::nn {

// Checkpoint layout: <base>.bin holds the arrays back to back as
// little-endian f32, row-major within each array; <base>.json is the
// manifest, a list of {name, shape: [rows, cols], offset} records.
// `skip` filters out arrays (used to drop the training-only projector).
void save_checkpoint(const ParamSet& params, const std::string& base,
                     const std::function<bool(const Param&)>& skip = nullptr);

// Loads every manifest array into the matching parameter; names absent from
// the manifest keep their current values, unknown names or shape mismatches
// are errors.
void load_checkpoint(ParamSet& params, const std::string& base);

bool checkpoint_exists(const std::string& base);

} // namespace chanrep::nn

#endif
