// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace fenn {

inline constexpr int kLanes = 32;

/// Xoroshiro32++ state (two 16-bit words). (0, 0) is not a valid state.
struct RngState {
    std::uint16_t s0 = 1;
    std::uint16_t s1 = 0;

    constexpr bool valid() const { return s0 != 0 || s1 != 0; }
    friend constexpr bool operator==(const RngState&, const RngState&) = default;
};

constexpr std::uint16_t rotl16(std::uint16_t x, int k) {
    return static_cast<std::uint16_t>((x << k) | (x >> (16 - k)));
}

struct RngStep {
    std::uint16_t value;
    RngState next;
};

/// One step of the generator: scrambler rotl(s0 + s1, 9) + s0, then the
/// (13, 5, 10) state transition.
constexpr RngStep rng_next(RngState s) {
    const auto value = static_cast<std::uint16_t>(rotl16(static_cast<std::uint16_t>(s.s0 + s.s1), 9) + s.s0);
    const auto t = static_cast<std::uint16_t>(s.s1 ^ s.s0);
    RngState n;
    n.s0 = static_cast<std::uint16_t>(rotl16(s.s0, 13) ^ t ^ static_cast<std::uint16_t>(t << 5));
    n.s1 = rotl16(t, 10);
    return {value, n};
}

/// Architectural VRNG result: top bit cleared.
constexpr std::uint16_t vrng_value(std::uint16_t raw) { return static_cast<std::uint16_t>(raw >> 1); }

enum class SeedHalf : std::uint8_t { Seed0, Seed1 };

using LaneStates = std::array<RngState, kLanes>;

/// Replaces one half of every lane's state. Returns a bitmask of lanes whose
/// resulting state is the invalid all-zero state.
std::uint32_t seed_lanes(std::span<const std::uint16_t, kLanes> values, SeedHalf which, LaneStates& states);

} // namespace fenn
