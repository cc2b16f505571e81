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

#ifndef CHANREP_COMMON_HPP
#define CHANREP_COMMON_HPP

#include <cstdint>
#include <random>

namespace chanrep {

// splitmix64 step; used to derive independent RNG streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(seed ^ splitmix64(salt + 1));
}

// One stream per (bs, ue, t) so that parallel and serial generation agree.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t bs, std::uint64_t ue, std::uint64_t t) {
    return mix_seed(mix_seed(mix_seed(seed, bs), ue), t);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

} // namespace chanrep

#endif
