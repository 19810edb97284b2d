// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fenn {

/// Signed 16-bit fixed-point format: `frac_bits` fractional bits, optional
/// saturation on add/sub.
struct QFormat {
    int frac_bits = 8;
    bool saturating = true;

    friend bool operator==(const QFormat&, const QFormat&) = default;
};

inline constexpr QFormat s7_8_sat{8, true};
inline constexpr QFormat s0_15_sat{15, true};
inline constexpr QFormat s9_6_sat{6, true};

/// Parses names such as "s7_8_sat_t" or "s9_6_t". Integer and fraction bits
/// must total 15. Throws std::invalid_argument otherwise.
QFormat parse_format(std::string_view name);
std::string format_name(QFormat fmt);

/// One lane datum. The interpretation (raw / 2^frac) depends on the QFormat
/// carried alongside it, not on the value itself.
struct Fx16 {
    std::int16_t raw = 0;

    constexpr Fx16() = default;
    constexpr explicit Fx16(std::int16_t r) : raw(r) {}
    static constexpr Fx16 from_bits(std::uint16_t bits) { return Fx16(static_cast<std::int16_t>(bits)); }
    constexpr std::uint16_t bits() const { return static_cast<std::uint16_t>(raw); }

    friend constexpr bool operator==(Fx16, Fx16) = default;
};

enum class RoundMode : std::uint8_t { ToZero = 0, ToNearest = 1, Stochastic = 2 };

const char* round_mode_name(RoundMode mode);

constexpr std::int16_t clamp16(std::int64_t v) {
    if (v > INT16_MAX) return INT16_MAX;
    if (v < INT16_MIN) return INT16_MIN;
    return static_cast<std::int16_t>(v);
}

constexpr std::int16_t wrap16(std::int64_t v) {
    return static_cast<std::int16_t>(static_cast<std::uint16_t>(static_cast<std::uint64_t>(v) & 0xFFFFu));
}

constexpr Fx16 sat_add(Fx16 a, Fx16 b, bool saturating) {
    const std::int64_t sum = std::int64_t{a.raw} + b.raw;
    return Fx16(saturating ? clamp16(sum) : wrap16(sum));
}

constexpr Fx16 sat_sub(Fx16 a, Fx16 b, bool saturating) {
    const std::int64_t diff = std::int64_t{a.raw} - b.raw;
    return Fx16(saturating ? clamp16(diff) : wrap16(diff));
}

/// Value added before the right shift. "Round to zero" adds nothing, so
/// negative values round towards -inf (the hardware behaviour).
constexpr std::int64_t rounding_addend(int shift, RoundMode mode, std::uint16_t rand) {
    switch (mode) {
    case RoundMode::ToZero: return 0;
    case RoundMode::ToNearest: return shift > 0 ? (std::int64_t{1} << (shift - 1)) : 0;
    case RoundMode::Stochastic: return static_cast<std::int64_t>(rand & ((1u << shift) - 1u));
    }
    return 0;
}

/// Lane multiply: exact 32-bit product, rounding addend, arithmetic shift,
/// low 16 bits kept (no saturation stage).
constexpr Fx16 mul_shift(Fx16 a, Fx16 b, int shift, RoundMode mode, std::uint16_t rand = 0) {
    const std::int64_t product = std::int64_t{a.raw} * b.raw;
    return Fx16(wrap16((product + rounding_addend(shift, mode, rand)) >> shift));
}

constexpr Fx16 shift_right_round(Fx16 a, int shift, RoundMode mode, std::uint16_t rand = 0) {
    return Fx16(wrap16((std::int64_t{a.raw} + rounding_addend(shift, mode, rand)) >> shift));
}

/// Host-side conversion of a real parameter: round-to-nearest, clamped.
Fx16 quantize(double x, QFormat fmt, bool* clamped = nullptr);

constexpr double to_double(Fx16 v, QFormat fmt) {
    return static_cast<double>(v.raw) / static_cast<double>(1 << fmt.frac_bits);
}

} // namespace fenn
