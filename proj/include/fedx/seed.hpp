/*
 * Copyright 2026 The fedx Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDX_SEED_HPP
#define FEDX_SEED_HPP

#include <cstdint>

namespace fedx {

/// What a derived seed is used for. Values are part of the seed scheme and
/// must not be renumbered.
enum class SeedPurpose : std::uint64_t {
    Backbone = 1,
    SharedConcept = 2,
    Domain = 3,
    InitialDecoder = 4,
    LocalTraining = 5,
    Exchange = 6,
    WarmupTraining = 7,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based seed: mix(mix(mix(mix(master) ^ purpose) ^ round) ^ index).
/// Independent of evaluation order, so clients may train in any order.
constexpr std::uint64_t derive_seed(std::uint64_t master, SeedPurpose purpose,
                                    std::uint64_t round = 0, std::uint64_t index = 0) noexcept {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ static_cast<std::uint64_t>(purpose));
    h = mix64(h ^ round);
    return mix64(h ^ index);
}

}  // namespace fedx

#endif  // FEDX_SEED_HPP
