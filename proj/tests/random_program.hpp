// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <string>

#include <fmt/format.h>

#include "fenn/machine.hpp"

namespace fenn::testing {

inline MemConfig small_memory() {
    MemConfig m;
    m.imem_bytes = 65536;
    m.dmem_bytes = 4096;
    m.vmem_bytes = 8192;
    m.llm_halfwords = 256;
    m.ext_bytes = 1 << 16;
    return m;
}

/// Random straight-line-ish program over the whole instruction set, written as
/// assembly. Register conventions keep every access in range:
///   s0 = 0, t1 = 2048 (seed/data region bases), t0 = 4096 (vector store
///   region base), s1 = scalar-memory base, t2 = loop counter,
///   v1..v3 = lane-local address vectors (0..31 per lane), x10..x31 free,
///   v4..v31 free. vmem [0, 4096) holds nonzero seed data and is never stored to.
inline std::string random_program(std::mt19937& rng, int n_instr) {
    auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto vr = [&] { return fmt::format("v{}", u(4, 31)); };
    auto va = [&] { return fmt::format("v{}", u(1, 3)); };
    auto xr = [&] { return fmt::format("x{}", u(10, 31)); };
    auto xs = [&] { return fmt::format("x{}", u(0, 1) ? u(10, 31) : 0); };
    const char* rnd[] = {"", ".rn", ".rs"};
    auto vbase = [&] { return std::array{"s0", "t1", "t0"}[u(0, 2)]; };

    std::string s = ".vdata\n";
    for (int k = 0; k < 2048; ++k) s += fmt::format(".half {}\n", u(1, 65535));
    s += ".text\n_start:\n  li s0, 0\n  li s1, 0\n  li t1, 2048\n  li t0, 4096\n";
    for (int r = 4; r < 32; ++r) s += fmt::format("  vlui v{}, {}\n", r, u(0, 65535));
    for (int r = 10; r < 32; ++r) s += fmt::format("  li x{}, {}\n", r, u(-3000, 3000));
    for (int r = 1; r <= 3; ++r) s += fmt::format("  vload.v v{0}, {1}(s0)\n  vandadd v{0}, v{0}, zero, 5\n", r, 64 * u(0, 31));

    int label = 0;
    int emitted = 0;
    auto one = [&](bool allow_branch) -> std::string {
        switch (u(0, 27)) {
        case 0: return fmt::format("vadd{} {}, {}, {}", u(0, 1) ? ".s" : "", vr(), vr(), vr());
        case 1: return fmt::format("vsub{} {}, {}, {}", u(0, 1) ? ".s" : "", vr(), vr(), vr());
        case 2: return fmt::format("vand {}, {}, {}", vr(), vr(), vr());
        case 3: return fmt::format("{} {}, {}, {}", u(0, 1) ? "vsl" : "vsr", vr(), vr(), vr());
        case 4: return fmt::format("vmul{} {}, {}, {}, {}", rnd[u(0, 2)], vr(), vr(), vr(), u(0, 15));
        case 5: return fmt::format("vt{} {}, {}, {}", std::array{"eq", "ne", "lt", "ge"}[u(0, 3)], xr(), vr(), vr());
        case 6: return fmt::format("vsel {}, {}, {}", vr(), xs(), vr());
        case 7: return fmt::format("vsli {}, {}, {}", vr(), vr(), u(0, 15));
        case 8: return fmt::format("vsri{} {}, {}, {}", rnd[u(0, 2)], vr(), vr(), u(0, 15));
        case 9: return fmt::format("vrng {}", vr());
        case 10: return fmt::format("vandadd {}, {}, {}, {}", vr(), vr(), xs(), u(0, 15));
        case 11: return fmt::format("vload.v {}, {}({})", vr(), 64 * u(0, 31), vbase());
        case 12: return fmt::format("vload.l {}, {}({})", vr(), u(0, 200), va());
        case 13: return fmt::format("vload.r{} {}({})", u(0, 1), 64 * u(0, 31), u(0, 1) ? "s0" : "t1");
        case 14: return fmt::format("vextract {}, {}, {}", xr(), vr(), u(0, 31));
        case 15: return fmt::format("vfill {}, {}", vr(), xs());
        case 16: return fmt::format("vstore.v {}, {}(t0)", vr(), 64 * u(0, 31));
        case 17: return fmt::format("vstore.l {}, {}({})", vr(), u(0, 200), va());
        case 18: return fmt::format("vlui {}, {}", vr(), u(0, 65535));
        case 19: return fmt::format("{} {}, {}, {}",
                                    std::array{"add", "sub", "xor", "or", "and", "sll", "srl", "sra", "slt", "sltu", "mul", "mulh", "mulhu", "mulhsu", "div", "divu", "rem", "remu"}[u(0, 17)],
                                    xr(), xs(), xs());
        case 20: return fmt::format("{} {}, {}, {}", std::array{"addi", "xori", "ori", "andi", "slti", "sltiu"}[u(0, 5)], xr(), xs(), u(-2048, 2047));
        case 21: return fmt::format("{} {}, {}, {}", std::array{"slli", "srli", "srai"}[u(0, 2)], xr(), xs(), u(0, 31));
        case 22: return fmt::format("lw {}, {}(s1)", xr(), 4 * u(0, 511));
        case 23: return fmt::format("{} {}, {}(s1)", std::array{"lh", "lhu"}[u(0, 1)], xr(), 2 * u(0, 1023));
        case 24: return fmt::format("{} {}, {}(s1)", std::array{"sw", "sh", "sb"}[u(0, 2)], xs(), 4 * u(0, 511));
        case 25: return fmt::format("clz {}, {}", xr(), xs());
        case 26: return fmt::format("lui {}, {}", xr(), u(0, 0xFFFFF));
        default:
            if (!allow_branch) return fmt::format("addi {}, {}, 1", xr(), xs());
            ++label;
            return fmt::format("{} {}, {}, .Lskip{}", std::array{"beq", "bne", "blt", "bge", "bltu", "bgeu"}[u(0, 5)], xs(), xs(), label);
        }
    };
    while (emitted < n_instr) {
        if (u(0, 40) == 0 && emitted + 8 < n_instr) {
            // small counted loop
            const int body = u(1, 5);
            s += fmt::format("  li t2, {}\n.Lloop{}:\n", u(1, 4), emitted);
            for (int k = 0; k < body; ++k) s += "  " + one(false) + "\n";
            s += fmt::format("  addi t2, t2, -1\n  bnez t2, .Lloop{}\n", emitted);
            emitted += body + 3;
            continue;
        }
        const std::string line = one(true);
        s += "  " + line + "\n";
        ++emitted;
        if (line.find(".Lskip") != std::string::npos) {
            const int skip = u(0, 3);
            for (int k = 0; k < skip; ++k) s += "  " + one(false) + "\n";
            emitted += skip;
            s += fmt::format(".Lskip{}:\n", label);
        }
    }
    s += "  ecall\n";
    return s;
}

} // namespace fenn::testing
