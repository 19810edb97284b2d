// SPDX-License-Identifier: Apache-2.0
#include "fenn/prng.hpp"

namespace fenn {

std::uint32_t seed_lanes(std::span<const std::uint16_t, kLanes> values, SeedHalf which, LaneStates& states) {
    std::uint32_t invalid = 0;
    for (int lane = 0; lane < kLanes; ++lane) {
        auto& s = states[lane];
        (which == SeedHalf::Seed0 ? s.s0 : s.s1) = values[lane];
        if (!s.valid()) invalid |= 1u << lane;
    }
    return invalid;
}

} // namespace fenn
