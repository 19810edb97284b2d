// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fenn {

/// Address spaces of one core. Lane-local addresses count halfwords; every
/// other space is byte addressed.
enum class Space : std::uint8_t { Imem = 0, Dmem = 1, Vmem = 2, Llm = 3, Ext = 4 };

const char* space_name(Space s);

inline constexpr int kAllLanes = -1;

struct Section {
    Space space = Space::Imem;
    int lane = kAllLanes; // only meaningful for Space::Llm
    std::uint32_t base = 0;
    std::vector<std::uint8_t> bytes;
};

struct Symbol {
    Space space = Space::Imem;
    std::uint32_t value = 0;
};

/// Assembled program plus data initialisers.
///
/// Binary layout (little endian):
///   "FENN" u32 version u32 entry u32 n_sections u32 n_symbols
///   n_sections x { u8 space, u8 lane (0xFF = all lanes), u16 0, u32 base, u32 length, bytes, pad to 4 }
///   n_symbols  x { u8 space, u8 0 u8 0 u8 0, u32 value, u16 name_length, name }
struct ProgramImage {
    std::uint32_t entry = 0;
    std::vector<Section> sections;
    std::map<std::string, Symbol> symbols;

    /// Instruction words of the Imem sections, flattened from address 0.
    std::vector<std::uint32_t> text() const;
    std::uint32_t symbol(const std::string& name) const;
};

inline constexpr std::uint32_t kImageVersion = 1;

void write_image(std::ostream& os, const ProgramImage& image);
ProgramImage read_image(std::istream& is);
void save_image(const std::string& path, const ProgramImage& image);
ProgramImage load_image(const std::string& path);

} // namespace fenn
