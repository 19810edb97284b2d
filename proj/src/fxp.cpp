// SPDX-License-Identifier: Apache-2.0
#include "fenn/fxp.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace fenn {

namespace {

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace

QFormat parse_format(std::string_view name) {
    auto fail = [&](const char* why) {
        return std::invalid_argument(fmt::format("invalid fixed-point format '{}': {}", name, why));
    };
    std::string_view rest = name;
    if (rest.empty() || rest.front() != 's') throw fail("expected leading 's'");
    rest.remove_prefix(1);
    if (rest.ends_with("_t")) rest.remove_suffix(2);
    bool saturating = false;
    if (rest.ends_with("_sat")) {
        saturating = true;
        rest.remove_suffix(4);
    }
    const auto sep = rest.find('_');
    if (sep == std::string_view::npos) throw fail("expected sI_F");
    int int_bits = 0;
    int frac_bits = 0;
    if (!parse_int(rest.substr(0, sep), int_bits) || !parse_int(rest.substr(sep + 1), frac_bits))
        throw fail("expected sI_F");
    if (int_bits < 0 || frac_bits < 0 || frac_bits > 15) throw fail("bit counts out of range");
    if (int_bits + frac_bits != 15) throw fail("integer and fraction bits must total 15");
    return QFormat{frac_bits, saturating};
}

std::string format_name(QFormat fmt) {
    return fmt::format("s{}_{}{}_t", 15 - fmt.frac_bits, fmt.frac_bits, fmt.saturating ? "_sat" : "");
}

const char* round_mode_name(RoundMode mode) {
    switch (mode) {
    case RoundMode::ToZero: return "zero";
    case RoundMode::ToNearest: return "nearest";
    case RoundMode::Stochastic: return "stochastic";
    }
    return "?";
}

Fx16 quantize(double x, QFormat fmt, bool* clamped) {
    const double scaled = std::nearbyint(std::ldexp(x, fmt.frac_bits));
    bool over = false;
    std::int16_t raw = 0;
    if (std::isnan(scaled)) {
        over = true;
    } else if (scaled > INT16_MAX) {
        raw = INT16_MAX;
        over = true;
    } else if (scaled < INT16_MIN) {
        raw = INT16_MIN;
        over = true;
    } else {
        raw = static_cast<std::int16_t>(scaled);
    }
    if (clamped) *clamped = over;
    return Fx16(raw);
}

} // namespace fenn
