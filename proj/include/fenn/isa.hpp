// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "fenn/fxp.hpp"

namespace fenn {

enum class Op : std::uint8_t {
    // Vector co-processor (opcode quadrant 0b10)
    VLUI, VADD, VSUB, VAND, VSL, VSR, VMUL,
    VTEQ, VTNE, VTLT, VTGE, VSEL,
    VSLI, VSRI, VRNG, VANDADD,
    VLOAD_V, VLOAD_L, VLOAD_R0, VLOAD_R1,
    VEXTRACT, VFILL, VSTORE_V, VSTORE_L,
    // Scalar RV32I + M + CLZ + Zicsr
    LUI, AUIPC, JAL, JALR,
    BEQ, BNE, BLT, BGE, BLTU, BGEU,
    LB, LH, LW, LBU, LHU, SB, SH, SW,
    ADDI, SLTI, SLTIU, XORI, ORI, ANDI, SLLI, SRLI, SRAI,
    ADD, SUB, SLL, SLT, SLTU, XOR, SRL, SRA, OR, AND,
    FENCE, ECALL, EBREAK,
    MUL, MULH, MULHSU, MULHU, DIV, DIVU, REM, REMU,
    CLZ,
    CSRRW, CSRRS, CSRRC, CSRRWI, CSRRSI, CSRRCI,
    Count_
};

inline constexpr int kOpCount = static_cast<int>(Op::Count_);

/// Canonical decoded instruction. Unused fields are zero. For vector R-type
/// instructions `funct7` carries the saturation flag (bit 6), rounding mode
/// (bits 5:4) and shift (bits 3:0); VSLI/VSRI carry shift and mode in `imm`.
struct Instr {
    Op op = Op::ECALL;
    std::uint8_t rd = 0;
    std::uint8_t rs1 = 0;
    std::uint8_t rs2 = 0;
    std::uint8_t funct7 = 0;
    std::int32_t imm = 0;

    bool saturating() const { return (funct7 & 0x40) != 0; }
    int shift() const { return (op == Op::VSLI || op == Op::VSRI) ? (imm & 0xF) : (funct7 & 0xF); }
    RoundMode round_mode() const {
        const int bits = (op == Op::VSRI) ? ((imm >> 4) & 3) : ((funct7 >> 4) & 3);
        return static_cast<RoundMode>(bits);
    }

    friend bool operator==(const Instr&, const Instr&) = default;
};

struct EncodeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IllegalInstruction : std::runtime_error {
    explicit IllegalInstruction(std::uint32_t w);
    std::uint32_t word;
};

std::string_view mnemonic(Op op);
bool is_vector(Op op);
bool is_vector_word(std::uint32_t word);

std::uint32_t encode(const Instr& i);
Instr decode(std::uint32_t word);

// Builders for the common shapes.
Instr make_r(Op op, int rd, int rs1, int rs2, int funct7 = 0);
Instr make_i(Op op, int rd, int rs1, std::int32_t imm);
Instr make_s(Op op, int rs1, int rs2, std::int32_t imm);
Instr vmul(int rd, int rs1, int rs2, int shift, RoundMode mode);
Instr vsri(int rd, int rs1, int shift, RoundMode mode);

/// Register roles used by the pipeline model.
struct RegUse {
    std::uint32_t vreads = 0;  // bitmask of vector registers read at decode
    int vwrite = -1;           // vector register written, or -1
    std::uint32_t xreads = 0;  // scalar registers read
    int xwrite = -1;           // scalar register written (x0 writes ignored)
    bool vector_load = false;  // result arrives only at writeback
    bool scalar_load = false;
};

RegUse reg_use(const Instr& i);

inline constexpr int kLaneMask = 31;

// Field packers shared with the assembler.
inline constexpr std::uint32_t kOpcodeVLui = 0b0000110;
inline constexpr std::uint32_t kOpcodeVArith = 0b0000010;
inline constexpr std::uint32_t kOpcodeVTest = 0b0001010;
inline constexpr std::uint32_t kOpcodeVSel = 0b0001110;
inline constexpr std::uint32_t kOpcodeVShiftImm = 0b0100110;
inline constexpr std::uint32_t kOpcodeVSpecial = 0b0100010;
inline constexpr std::uint32_t kOpcodeVLoad = 0b0010010;
inline constexpr std::uint32_t kOpcodeVMove = 0b0011010;
inline constexpr std::uint32_t kOpcodeVStore = 0b0010110;

} // namespace fenn
