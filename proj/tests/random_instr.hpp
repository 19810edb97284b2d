// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>

#include "fenn/isa.hpp"

namespace fenn::testing {

/// Random canonical instruction of the given op (fields drawn uniformly over
/// their legal ranges).
inline Instr random_instr(Op op, std::mt19937& rng) {
    auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const int rd = u(0, 31), rs1 = u(0, 31), rs2 = u(0, 31);
    switch (op) {
    case Op::VLUI: return make_i(op, rd, 0, u(0, 0xFFFF));
    case Op::VADD:
    case Op::VSUB: return make_r(op, rd, rs1, rs2, u(0, 1) << 6);
    case Op::VMUL: return vmul(rd, rs1, rs2, u(0, 15), static_cast<RoundMode>(u(0, 2)));
    case Op::VAND:
    case Op::VSL:
    case Op::VSR:
    case Op::VTEQ:
    case Op::VTNE:
    case Op::VTLT:
    case Op::VTGE:
    case Op::VSEL: return make_r(op, rd, rs1, rs2);
    case Op::VSLI: return make_i(op, rd, rs1, u(0, 15));
    case Op::VSRI: return vsri(rd, rs1, u(0, 15), static_cast<RoundMode>(u(0, 2)));
    case Op::VRNG: return make_r(op, rd, 0, 0);
    case Op::VANDADD: return make_r(op, rd, rs1, rs2, u(0, 15));
    case Op::VLOAD_V:
    case Op::VLOAD_L: return make_i(op, rd, rs1, u(-2048, 2047));
    case Op::VLOAD_R0:
    case Op::VLOAD_R1: return make_i(op, 0, rs1, u(-2048, 2047));
    case Op::VEXTRACT: return make_i(op, rd, rs1, u(0, 31));
    case Op::VFILL: return make_i(op, rd, rs1, 0);
    case Op::VSTORE_V:
    case Op::VSTORE_L:
    case Op::SB:
    case Op::SH:
    case Op::SW: return make_s(op, rs1, rs2, u(-2048, 2047));
    case Op::LUI:
    case Op::AUIPC: return make_i(op, rd, 0, u(0, 0xFFFFF));
    case Op::JAL: return make_i(op, rd, 0, u(-(1 << 19), (1 << 19) - 1) * 2);
    case Op::BEQ:
    case Op::BNE:
    case Op::BLT:
    case Op::BGE:
    case Op::BLTU:
    case Op::BGEU: return make_s(op, rs1, rs2, u(-2048, 2047) * 2);
    case Op::SLLI:
    case Op::SRLI:
    case Op::SRAI: return make_i(op, rd, rs1, u(0, 31));
    case Op::ECALL:
    case Op::EBREAK: return make_r(op, 0, 0, 0);
    case Op::FENCE: return make_i(op, 0, 0, u(0, 0xFFF));
    case Op::CLZ: return make_r(op, rd, rs1, 0);
    case Op::CSRRW:
    case Op::CSRRS:
    case Op::CSRRC:
    case Op::CSRRWI:
    case Op::CSRRSI:
    case Op::CSRRCI: return make_i(op, rd, rs1, u(0, 0xFFF));
    case Op::JALR:
    case Op::LB:
    case Op::LH:
    case Op::LW:
    case Op::LBU:
    case Op::LHU:
    case Op::ADDI:
    case Op::SLTI:
    case Op::SLTIU:
    case Op::XORI:
    case Op::ORI:
    case Op::ANDI: return make_i(op, rd, rs1, u(-2048, 2047));
    default: return make_r(op, rd, rs1, rs2);
    }
}

} // namespace fenn::testing
