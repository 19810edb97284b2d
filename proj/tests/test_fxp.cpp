// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "fenn/fxp.hpp"

using namespace fenn;

namespace {
Fx16 h(std::uint16_t bits) { return Fx16::from_bits(bits); }
} // namespace

TEST_CASE("saturating add and subtract") {
    CHECK(sat_add(h(0x7FFF), h(0x0001), true) == h(0x7FFF));
    CHECK(sat_add(h(0x0100), h(0x0180), true) == h(0x0280));
    CHECK(sat_add(h(0x7FFF), h(0x0001), false) == h(0x8000));
    CHECK(sat_sub(h(0x8000), h(0x0001), true) == h(0x8000));
    CHECK(sat_sub(h(0x0280), h(0x0180), true) == h(0x0100));
    CHECK(sat_sub(h(0x8000), h(0x0001), false) == h(0x7FFF));
}

TEST_CASE("multiply with shift") {
    CHECK(mul_shift(h(0x0180), h(0x0180), 8, RoundMode::ToZero) == h(0x0240));
    CHECK(mul_shift(h(0x0003), h(0x0003), 1, RoundMode::ToNearest) == h(0x0005));
    CHECK(mul_shift(h(0x1234), h(0x0000), 7, RoundMode::Stochastic, 0x7FFF) == h(0));
    // shift 0: nearest has no half ulp
    CHECK(mul_shift(h(3), h(5), 0, RoundMode::ToNearest) == h(15));
    // low 16 bits kept, no clamp
    CHECK(mul_shift(h(0x4000), h(0x0004), 0, RoundMode::ToZero) == h(0x0000));
}

TEST_CASE("shift right with rounding") {
    CHECK(shift_right_round(h(0x0009), 1, RoundMode::ToNearest) == h(0x0005));
    CHECK(shift_right_round(h(0xFFFF), 4, RoundMode::ToZero) == h(0xFFFF));
    for (int x = -32768; x < 32768; x += 97) {
        const Fx16 v(static_cast<std::int16_t>(x));
        CHECK(shift_right_round(v, 0, RoundMode::ToNearest) == v);
    }
    // stochastic addend never reaches one output ulp
    CHECK(shift_right_round(h(0x0010), 4, RoundMode::Stochastic, 0xFFFF) == h(0x0001));
}

TEST_CASE("to-zero mode is floor division for products") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> d(-32768, 32767);
    for (int k = 0; k < 20000; ++k) {
        const auto a = static_cast<std::int16_t>(d(rng)), b = static_cast<std::int16_t>(d(rng));
        const int s = k % 16;
        const std::int64_t p = std::int64_t{a} * b;
        const auto expect = static_cast<std::int64_t>(std::floor(static_cast<double>(p) / std::ldexp(1.0, s)));
        CHECK(mul_shift(Fx16(a), Fx16(b), s, RoundMode::ToZero).raw == static_cast<std::int16_t>(expect & 0xFFFF));
    }
}

TEST_CASE("quantize") {
    CHECK(quantize(1.0, s7_8_sat) == h(0x0100));
    bool clamped = false;
    CHECK(quantize(200.0, s7_8_sat, &clamped) == h(0x7FFF));
    CHECK(clamped);
    const Fx16 alpha = quantize(std::exp(-1.0 / 20.0), s0_15_sat);
    CHECK(alpha.raw == static_cast<std::int16_t>(std::lround(std::exp(-0.05) * 32768.0)));
    CHECK(alpha == h(0x79C2)); // 0.951229... * 32768 = 31169.9
    CHECK(quantize(-1.0, s0_15_sat) == h(0x8000));
}

TEST_CASE("format names") {
    CHECK(parse_format("s7_8_sat_t") == QFormat{8, true});
    CHECK(parse_format("s0_15_sat_t") == QFormat{15, true});
    CHECK(parse_format("s9_6_sat_t") == QFormat{6, true});
    CHECK(parse_format("s9_6_t") == QFormat{6, false});
    CHECK_THROWS_AS(parse_format("s8_8_sat_t"), std::invalid_argument);
    CHECK_THROWS_AS(parse_format("q7_8"), std::invalid_argument);
    CHECK(format_name(s9_6_sat) == "s9_6_sat_t");
}
