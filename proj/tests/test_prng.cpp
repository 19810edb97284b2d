// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "fenn/prng.hpp"

using namespace fenn;

namespace {

// Straight-line restatement of the generator, written independently of prng.hpp.
std::pair<unsigned, std::pair<unsigned, unsigned>> reference_next(unsigned s0, unsigned s1) {
    auto rot = [](unsigned x, unsigned k) { return ((x << k) | (x >> (16 - k))) & 0xFFFFu; };
    const unsigned out = (rot((s0 + s1) & 0xFFFFu, 9) + s0) & 0xFFFFu;
    s1 ^= s0;
    const unsigned n0 = rot(s0, 13) ^ s1 ^ ((s1 << 5) & 0xFFFFu);
    const unsigned n1 = rot(s1, 10);
    return {out, {n0, n1}};
}

} // namespace

TEST_CASE("first step from (1, 0)") {
    const auto r = rng_next(RngState{1, 0});
    CHECK(r.value == 0x0201);
    CHECK(r.next == RngState{0x2021, 0x0400});
}

TEST_CASE("matches independent restatement and never reaches zero") {
    RngState s{0xACE1, 0x1234};
    for (int k = 0; k < 200000; ++k) {
        const auto ref = reference_next(s.s0, s.s1);
        const auto r = rng_next(s);
        REQUIRE(r.value == ref.first);
        REQUIRE(r.next.s0 == ref.second.first);
        REQUIRE(r.next.s1 == ref.second.second);
        REQUIRE(r.next.valid());
        s = r.next;
    }
}

TEST_CASE("equidistribution over 16 bins") {
    RngState s{1, 0};
    std::array<int, 16> bins{};
    const int n = 1000000;
    for (int k = 0; k < n; ++k) {
        const auto r = rng_next(s);
        ++bins[r.value >> 12];
        s = r.next;
    }
    // 3 sigma of a binomial(n, 1/16)
    const double sigma = std::sqrt(n * (1.0 / 16) * (15.0 / 16));
    for (int b : bins) CHECK(std::abs(b - n / 16) < 3 * sigma);
}

TEST_CASE("vrng values stay below 2^15") {
    RngState s{7, 9};
    for (int k = 0; k < 10000; ++k) {
        const auto r = rng_next(s);
        CHECK(vrng_value(r.value) <= 32767);
        s = r.next;
    }
}

TEST_CASE("seeding lanes") {
    LaneStates states{};
    std::array<std::uint16_t, kLanes> zeros{};
    std::array<std::uint16_t, kLanes> ones{};
    ones.fill(1);
    CHECK(seed_lanes(ones, SeedHalf::Seed0, states) == 0);
    CHECK(seed_lanes(zeros, SeedHalf::Seed1, states) == 0);
    for (const auto& s : states) CHECK(s == RngState{1, 0});

    std::array<std::uint16_t, kLanes> some = ones;
    some[3] = 0;
    some[17] = 0;
    CHECK(seed_lanes(some, SeedHalf::Seed0, states) == ((1u << 3) | (1u << 17)));

    // distinct seeds give distinct streams
    std::array<std::uint16_t, kLanes> distinct{};
    for (int i = 0; i < kLanes; ++i) distinct[i] = static_cast<std::uint16_t>(i + 1);
    seed_lanes(distinct, SeedHalf::Seed0, states);
    seed_lanes(zeros, SeedHalf::Seed1, states);
    std::array<std::vector<std::uint16_t>, kLanes> streams;
    for (int k = 0; k < 1000; ++k)
        for (int i = 0; i < kLanes; ++i) {
            const auto r = rng_next(states[i]);
            streams[i].push_back(r.value);
            states[i] = r.next;
        }
    for (int i = 0; i < kLanes; ++i)
        for (int j = i + 1; j < kLanes; ++j) CHECK(streams[i] != streams[j]);
}
