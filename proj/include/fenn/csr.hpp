// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace fenn::csr {

inline constexpr std::uint16_t kDmaExtAddr = 0x7C0;
inline constexpr std::uint16_t kDmaLocalAddr = 0x7C1;
inline constexpr std::uint16_t kDmaBytes = 0x7C2;
inline constexpr std::uint16_t kDmaCtrl = 0x7C3;   // bit0 start, bit1 direction (1 = vmem -> ext)
inline constexpr std::uint16_t kDmaStatus = 0x7C4; // bit0 busy
inline constexpr std::uint16_t kPerfRegion = 0x7C5;
inline constexpr std::uint16_t kMcycle = 0xB00;
inline constexpr std::uint16_t kMinstret = 0xB02;
inline constexpr std::uint16_t kMcycleH = 0xB80;
inline constexpr std::uint16_t kMinstretH = 0xB82;

inline constexpr std::uint32_t kDmaStart = 1u;
inline constexpr std::uint32_t kDmaToExternal = 2u;

std::optional<std::uint16_t> lookup(std::string_view name);

} // namespace fenn::csr
