// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "fenn/image.hpp"
#include "fenn/isa.hpp"

namespace fenn {

struct AsmError : std::runtime_error {
    AsmError(int line, const std::string& message);
    int line;
};

/// Two-pass assembler for the combined scalar + vector instruction set.
///
/// Syntax overview:
///   label:  vadd.s v3, v1, v2          # saturating add
///           vmul.rn v4, v2, v3, 8      # rounding suffix .rz/.rn/.rs, shift last
///           vload.v v1, 64(a0)         # vector memory, byte offset
///           vload.l v2, 3(v5)          # lane-local memory, halfword offset
///           beq a0, a1, label          # numeric operand = PC-relative offset
///   .text / .data / .vdata / .lldata [addr]   select address space
///   .word .half .byte .space .align .org .equ .lane <i|all>
ProgramImage assemble(std::string_view source);

/// Canonical text for one instruction word; illegal words become ".word 0x...".
std::string disassemble(std::uint32_t word);
std::string disassemble(const Instr& instr);

/// Vector register names v0..v31, scalar x0..x31 with ABI aliases.
std::string xreg_name(int r);

} // namespace fenn
