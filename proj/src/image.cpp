// SPDX-License-Identifier: Apache-2.0
#include "fenn/image.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

namespace fenn {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 24)};
    os.write(b, 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
    const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    os.write(b, 2);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("image: truncated file");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t{b[3]} << 24);
}

std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2)) throw std::runtime_error("image: truncated file");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

} // namespace

const char* space_name(Space s) {
    switch (s) {
    case Space::Imem: return "imem";
    case Space::Dmem: return "dmem";
    case Space::Vmem: return "vmem";
    case Space::Llm: return "llm";
    case Space::Ext: return "ext";
    }
    return "?";
}

std::vector<std::uint32_t> ProgramImage::text() const {
    std::uint32_t end = 0;
    for (const auto& s : sections)
        if (s.space == Space::Imem) end = std::max<std::uint32_t>(end, s.base + static_cast<std::uint32_t>(s.bytes.size()));
    std::vector<std::uint32_t> words((end + 3) / 4, 0);
    for (const auto& s : sections) {
        if (s.space != Space::Imem) continue;
        for (std::size_t i = 0; i < s.bytes.size(); ++i) {
            const std::size_t addr = s.base + i;
            words[addr / 4] |= std::uint32_t{s.bytes[i]} << (8 * (addr % 4));
        }
    }
    return words;
}

std::uint32_t ProgramImage::symbol(const std::string& name) const {
    const auto it = symbols.find(name);
    if (it == symbols.end()) throw std::out_of_range(fmt::format("image: no symbol '{}'", name));
    return it->second.value;
}

void write_image(std::ostream& os, const ProgramImage& image) {
    os.write("FENN", 4);
    put_u32(os, kImageVersion);
    put_u32(os, image.entry);
    put_u32(os, static_cast<std::uint32_t>(image.sections.size()));
    put_u32(os, static_cast<std::uint32_t>(image.symbols.size()));
    for (const auto& s : image.sections) {
        os.put(static_cast<char>(s.space));
        os.put(static_cast<char>(s.lane == kAllLanes ? 0xFF : s.lane));
        put_u16(os, 0);
        put_u32(os, s.base);
        put_u32(os, static_cast<std::uint32_t>(s.bytes.size()));
        os.write(reinterpret_cast<const char*>(s.bytes.data()), static_cast<std::streamsize>(s.bytes.size()));
        for (std::size_t pad = s.bytes.size(); pad % 4 != 0; ++pad) os.put(0);
    }
    for (const auto& [name, sym] : image.symbols) {
        os.put(static_cast<char>(sym.space));
        os.put(0), os.put(0), os.put(0);
        put_u32(os, sym.value);
        put_u16(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
}

ProgramImage read_image(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "FENN", 4) != 0) throw std::runtime_error("image: bad magic");
    if (const auto version = get_u32(is); version != kImageVersion)
        throw std::runtime_error(fmt::format("image: unsupported version {}", version));
    ProgramImage image;
    image.entry = get_u32(is);
    const auto n_sections = get_u32(is);
    const auto n_symbols = get_u32(is);
    for (std::uint32_t k = 0; k < n_sections; ++k) {
        Section s;
        const int space = is.get();
        const int lane = is.get();
        if (space < 0 || space > static_cast<int>(Space::Ext)) throw std::runtime_error("image: bad space id");
        s.space = static_cast<Space>(space);
        s.lane = lane == 0xFF ? kAllLanes : lane;
        get_u16(is);
        s.base = get_u32(is);
        const auto length = get_u32(is);
        s.bytes.resize(length);
        if (!is.read(reinterpret_cast<char*>(s.bytes.data()), length)) throw std::runtime_error("image: truncated section");
        for (std::uint32_t pad = length; pad % 4 != 0; ++pad) is.get();
        image.sections.push_back(std::move(s));
    }
    for (std::uint32_t k = 0; k < n_symbols; ++k) {
        Symbol sym;
        sym.space = static_cast<Space>(is.get());
        is.get(), is.get(), is.get();
        sym.value = get_u32(is);
        std::string name(get_u16(is), '\0');
        if (!is.read(name.data(), static_cast<std::streamsize>(name.size()))) throw std::runtime_error("image: truncated symbol");
        image.symbols.emplace(std::move(name), sym);
    }
    return image;
}

void save_image(const std::string& path, const ProgramImage& image) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(fmt::format("cannot write '{}'", path));
    write_image(os, image);
}

ProgramImage load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(fmt::format("cannot read '{}'", path));
    return read_image(is);
}

} // namespace fenn
