// SPDX-License-Identifier: Apache-2.0
#include "fenn/isa.hpp"

#include <array>

#include <fmt/format.h>

namespace fenn {

namespace {

enum class Fmt : std::uint8_t {
    VU,     // VLUI
    VR,     // vector R-type (funct7 meaning depends on op)
    VI,     // vector I-type
    VS,     // vector S-type
    R,      // scalar register-register
    I,      // scalar 12-bit immediate
    IShift, // SLLI/SRLI/SRAI
    S,
    B,
    U,
    J,
    Sys,    // ECALL/EBREAK
    Fence,
    Csr,
    CsrI,
    Unary,  // CLZ
};

struct OpInfo {
    std::string_view name;
    Fmt fmt;
    std::uint8_t opcode;
    std::uint8_t funct3;
    std::uint8_t funct7; // fixed funct7 for scalar R/IShift/Unary
};

constexpr std::array<OpInfo, kOpCount> kOps = {{
    {"vlui", Fmt::VU, kOpcodeVLui, 0, 0},
    {"vadd", Fmt::VR, kOpcodeVArith, 0b000, 0},
    {"vsub", Fmt::VR, kOpcodeVArith, 0b010, 0},
    {"vand", Fmt::VR, kOpcodeVArith, 0b011, 0},
    {"vsl", Fmt::VR, kOpcodeVArith, 0b001, 0},
    {"vsr", Fmt::VR, kOpcodeVArith, 0b101, 0},
    {"vmul", Fmt::VR, kOpcodeVArith, 0b100, 0},
    {"vteq", Fmt::VR, kOpcodeVTest, 0b000, 0},
    {"vtne", Fmt::VR, kOpcodeVTest, 0b010, 0},
    {"vtlt", Fmt::VR, kOpcodeVTest, 0b100, 0},
    {"vtge", Fmt::VR, kOpcodeVTest, 0b110, 0},
    {"vsel", Fmt::VR, kOpcodeVSel, 0b000, 0},
    {"vsli", Fmt::VI, kOpcodeVShiftImm, 0b000, 0},
    {"vsri", Fmt::VI, kOpcodeVShiftImm, 0b001, 0},
    {"vrng", Fmt::VR, kOpcodeVSpecial, 0b000, 0},
    {"vandadd", Fmt::VR, kOpcodeVSpecial, 0b001, 0},
    {"vload.v", Fmt::VI, kOpcodeVLoad, 0b000, 0},
    {"vload.l", Fmt::VI, kOpcodeVLoad, 0b010, 0},
    {"vload.r0", Fmt::VI, kOpcodeVLoad, 0b001, 0},
    {"vload.r1", Fmt::VI, kOpcodeVLoad, 0b101, 0},
    {"vextract", Fmt::VI, kOpcodeVMove, 0b001, 0},
    {"vfill", Fmt::VI, kOpcodeVMove, 0b000, 0},
    {"vstore.v", Fmt::VS, kOpcodeVStore, 0b000, 0},
    {"vstore.l", Fmt::VS, kOpcodeVStore, 0b010, 0},

    {"lui", Fmt::U, 0b0110111, 0, 0},
    {"auipc", Fmt::U, 0b0010111, 0, 0},
    {"jal", Fmt::J, 0b1101111, 0, 0},
    {"jalr", Fmt::I, 0b1100111, 0b000, 0},
    {"beq", Fmt::B, 0b1100011, 0b000, 0},
    {"bne", Fmt::B, 0b1100011, 0b001, 0},
    {"blt", Fmt::B, 0b1100011, 0b100, 0},
    {"bge", Fmt::B, 0b1100011, 0b101, 0},
    {"bltu", Fmt::B, 0b1100011, 0b110, 0},
    {"bgeu", Fmt::B, 0b1100011, 0b111, 0},
    {"lb", Fmt::I, 0b0000011, 0b000, 0},
    {"lh", Fmt::I, 0b0000011, 0b001, 0},
    {"lw", Fmt::I, 0b0000011, 0b010, 0},
    {"lbu", Fmt::I, 0b0000011, 0b100, 0},
    {"lhu", Fmt::I, 0b0000011, 0b101, 0},
    {"sb", Fmt::S, 0b0100011, 0b000, 0},
    {"sh", Fmt::S, 0b0100011, 0b001, 0},
    {"sw", Fmt::S, 0b0100011, 0b010, 0},
    {"addi", Fmt::I, 0b0010011, 0b000, 0},
    {"slti", Fmt::I, 0b0010011, 0b010, 0},
    {"sltiu", Fmt::I, 0b0010011, 0b011, 0},
    {"xori", Fmt::I, 0b0010011, 0b100, 0},
    {"ori", Fmt::I, 0b0010011, 0b110, 0},
    {"andi", Fmt::I, 0b0010011, 0b111, 0},
    {"slli", Fmt::IShift, 0b0010011, 0b001, 0b0000000},
    {"srli", Fmt::IShift, 0b0010011, 0b101, 0b0000000},
    {"srai", Fmt::IShift, 0b0010011, 0b101, 0b0100000},
    {"add", Fmt::R, 0b0110011, 0b000, 0b0000000},
    {"sub", Fmt::R, 0b0110011, 0b000, 0b0100000},
    {"sll", Fmt::R, 0b0110011, 0b001, 0b0000000},
    {"slt", Fmt::R, 0b0110011, 0b010, 0b0000000},
    {"sltu", Fmt::R, 0b0110011, 0b011, 0b0000000},
    {"xor", Fmt::R, 0b0110011, 0b100, 0b0000000},
    {"srl", Fmt::R, 0b0110011, 0b101, 0b0000000},
    {"sra", Fmt::R, 0b0110011, 0b101, 0b0100000},
    {"or", Fmt::R, 0b0110011, 0b110, 0b0000000},
    {"and", Fmt::R, 0b0110011, 0b111, 0b0000000},
    {"fence", Fmt::Fence, 0b0001111, 0b000, 0},
    {"ecall", Fmt::Sys, 0b1110011, 0b000, 0},
    {"ebreak", Fmt::Sys, 0b1110011, 0b000, 0},
    {"mul", Fmt::R, 0b0110011, 0b000, 0b0000001},
    {"mulh", Fmt::R, 0b0110011, 0b001, 0b0000001},
    {"mulhsu", Fmt::R, 0b0110011, 0b010, 0b0000001},
    {"mulhu", Fmt::R, 0b0110011, 0b011, 0b0000001},
    {"div", Fmt::R, 0b0110011, 0b100, 0b0000001},
    {"divu", Fmt::R, 0b0110011, 0b101, 0b0000001},
    {"rem", Fmt::R, 0b0110011, 0b110, 0b0000001},
    {"remu", Fmt::R, 0b0110011, 0b111, 0b0000001},
    {"clz", Fmt::Unary, 0b0010011, 0b001, 0b0110000},
    {"csrrw", Fmt::Csr, 0b1110011, 0b001, 0},
    {"csrrs", Fmt::Csr, 0b1110011, 0b010, 0},
    {"csrrc", Fmt::Csr, 0b1110011, 0b011, 0},
    {"csrrwi", Fmt::CsrI, 0b1110011, 0b101, 0},
    {"csrrsi", Fmt::CsrI, 0b1110011, 0b110, 0},
    {"csrrci", Fmt::CsrI, 0b1110011, 0b111, 0},
}};

const OpInfo& info(Op op) { return kOps[static_cast<std::size_t>(op)]; }

[[noreturn]] void bad_field(const Instr& i, std::string_view field, std::string_view why = "out of range") {
    throw EncodeError(fmt::format("{}: {} {}", mnemonic(i.op), field, why));
}

bool in_signed(std::int32_t v, int bits) {
    return v >= -(1 << (bits - 1)) && v < (1 << (bits - 1));
}

// Rejects field values that have no canonical encoding for this instruction.
void validate(const Instr& i) {
    if (static_cast<int>(i.op) >= kOpCount) throw EncodeError("unknown op");
    if (i.rd > 31) bad_field(i, "rd");
    if (i.rs1 > 31) bad_field(i, "rs1");
    if (i.rs2 > 31) bad_field(i, "rs2");
    if (i.funct7 > 127) bad_field(i, "funct7");

    const auto& inf = info(i.op);
    auto require_zero = [&](bool rd, bool rs1, bool rs2, bool f7, bool imm) {
        if (rd && i.rd != 0) bad_field(i, "rd", "must be zero");
        if (rs1 && i.rs1 != 0) bad_field(i, "rs1", "must be zero");
        if (rs2 && i.rs2 != 0) bad_field(i, "rs2", "must be zero");
        if (f7 && i.funct7 != 0) bad_field(i, "funct7", "must be zero");
        if (imm && i.imm != 0) bad_field(i, "imm", "must be zero");
    };

    switch (inf.fmt) {
    case Fmt::VU:
        require_zero(false, true, true, true, false);
        if (i.imm < 0 || i.imm > 0xFFFF) bad_field(i, "imm", "out of range (16-bit lane value)");
        break;
    case Fmt::VR:
        require_zero(false, false, false, false, true);
        switch (i.op) {
        case Op::VADD:
        case Op::VSUB:
            if ((i.funct7 & ~0x40) != 0) bad_field(i, "funct7", "only the saturation bit may be set");
            break;
        case Op::VMUL:
            if (i.funct7 & 0x40) bad_field(i, "funct7", "saturation is not supported");
            if (((i.funct7 >> 4) & 3) == 3) bad_field(i, "funct7", "reserved rounding mode");
            break;
        case Op::VANDADD:
            if (i.funct7 > 15) bad_field(i, "funct7", "shift must be 0..15");
            break;
        case Op::VRNG:
            require_zero(false, true, true, true, true);
            break;
        default:
            if (i.funct7 != 0) bad_field(i, "funct7", "must be zero");
            break;
        }
        break;
    case Fmt::VI:
        require_zero(false, false, true, true, false);
        switch (i.op) {
        case Op::VSLI:
            if (i.imm < 0 || i.imm > 15) bad_field(i, "imm", "shift must be 0..15");
            break;
        case Op::VSRI:
            if (i.imm < 0 || i.imm > 63) bad_field(i, "imm", "out of range");
            if (((i.imm >> 4) & 3) == 3) bad_field(i, "imm", "reserved rounding mode");
            break;
        case Op::VLOAD_R0:
        case Op::VLOAD_R1:
            if (i.rd != 0) bad_field(i, "rd", "must be zero");
            [[fallthrough]];
        case Op::VLOAD_V:
        case Op::VLOAD_L:
            if (!in_signed(i.imm, 12)) bad_field(i, "imm");
            break;
        case Op::VEXTRACT:
            if (i.imm < 0 || i.imm > kLaneMask) bad_field(i, "imm", "lane must be 0..31");
            break;
        case Op::VFILL:
            if (i.imm != 0) bad_field(i, "imm", "must be zero");
            break;
        default: break;
        }
        break;
    case Fmt::VS:
        require_zero(true, false, false, true, false);
        if (!in_signed(i.imm, 12)) bad_field(i, "imm");
        break;
    case Fmt::R:
        require_zero(false, false, false, true, true);
        break;
    case Fmt::I:
        require_zero(false, false, true, true, false);
        if (!in_signed(i.imm, 12)) bad_field(i, "imm");
        break;
    case Fmt::IShift:
        require_zero(false, false, true, true, false);
        if (i.imm < 0 || i.imm > 31) bad_field(i, "imm", "shift must be 0..31");
        break;
    case Fmt::S:
        require_zero(true, false, false, true, false);
        if (!in_signed(i.imm, 12)) bad_field(i, "imm");
        break;
    case Fmt::B:
        require_zero(true, false, false, true, false);
        if (!in_signed(i.imm, 13)) bad_field(i, "imm", "branch offset out of range");
        if (i.imm & 1) bad_field(i, "imm", "branch offset must be even");
        break;
    case Fmt::U:
        require_zero(false, true, true, true, false);
        if (i.imm < 0 || i.imm > 0xFFFFF) bad_field(i, "imm", "out of range (20-bit)");
        break;
    case Fmt::J:
        require_zero(false, true, true, true, false);
        if (!in_signed(i.imm, 21)) bad_field(i, "imm", "jump offset out of range");
        if (i.imm & 1) bad_field(i, "imm", "jump offset must be even");
        break;
    case Fmt::Sys:
        require_zero(true, true, true, true, true);
        break;
    case Fmt::Fence:
        require_zero(true, true, true, true, false);
        if (i.imm < 0 || i.imm > 0xFFF) bad_field(i, "imm");
        break;
    case Fmt::Csr:
    case Fmt::CsrI:
        require_zero(false, false, true, true, false);
        if (i.imm < 0 || i.imm > 0xFFF) bad_field(i, "csr");
        break;
    case Fmt::Unary:
        require_zero(false, false, true, true, true);
        break;
    }
}

constexpr std::uint32_t pack_r(std::uint32_t f7, std::uint32_t rs2, std::uint32_t rs1, std::uint32_t f3,
                               std::uint32_t rd, std::uint32_t opcode) {
    return (f7 << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode;
}

std::int32_t sign_extend(std::uint32_t v, int bits) {
    const std::uint32_t m = 1u << (bits - 1);
    v &= (bits == 32) ? 0xFFFFFFFFu : ((1u << bits) - 1u);
    return static_cast<std::int32_t>((v ^ m) - m);
}

} // namespace

IllegalInstruction::IllegalInstruction(std::uint32_t w)
    : std::runtime_error(fmt::format("illegal instruction 0x{:08x}", w)), word(w) {}

std::string_view mnemonic(Op op) { return info(op).name; }

bool is_vector(Op op) { return op <= Op::VSTORE_L; }

bool is_vector_word(std::uint32_t word) { return (word & 3u) == 2u; }

std::uint32_t encode(const Instr& i) {
    validate(i);
    const auto& inf = info(i.op);
    const std::uint32_t rd = i.rd, rs1 = i.rs1, rs2 = i.rs2;
    const auto imm = static_cast<std::uint32_t>(i.imm);
    switch (inf.fmt) {
    case Fmt::VU:
    case Fmt::U:
        return (imm << 12) | (rd << 7) | inf.opcode;
    case Fmt::VR:
        return pack_r(i.funct7, rs2, rs1, inf.funct3, rd, inf.opcode);
    case Fmt::R:
    case Fmt::Unary:
        return pack_r(inf.funct7, inf.fmt == Fmt::Unary ? 0 : rs2, rs1, inf.funct3, rd, inf.opcode);
    case Fmt::VI:
    case Fmt::I:
    case Fmt::Fence:
    case Fmt::Csr:
    case Fmt::CsrI:
        return ((imm & 0xFFF) << 20) | (rs1 << 15) | (std::uint32_t{inf.funct3} << 12) | (rd << 7) | inf.opcode;
    case Fmt::IShift:
        return pack_r(inf.funct7, imm & 0x1F, rs1, inf.funct3, rd, inf.opcode);
    case Fmt::VS:
    case Fmt::S:
        return pack_r((imm >> 5) & 0x7F, rs2, rs1, inf.funct3, imm & 0x1F, inf.opcode);
    case Fmt::B:
        return (((imm >> 12) & 1) << 31) | (((imm >> 5) & 0x3F) << 25) | (rs2 << 20) | (rs1 << 15) |
               (std::uint32_t{inf.funct3} << 12) | (((imm >> 1) & 0xF) << 8) | (((imm >> 11) & 1) << 7) |
               inf.opcode;
    case Fmt::J:
        return (((imm >> 20) & 1) << 31) | (((imm >> 1) & 0x3FF) << 21) | (((imm >> 11) & 1) << 20) |
               (((imm >> 12) & 0xFF) << 12) | (rd << 7) | inf.opcode;
    case Fmt::Sys:
        return (i.op == Op::EBREAK ? (1u << 20) : 0u) | inf.opcode;
    }
    throw EncodeError("unreachable");
}

namespace {

Op find_op(std::uint32_t w) {
    const std::uint32_t opcode = w & 0x7F;
    const std::uint32_t f3 = (w >> 12) & 7;
    const std::uint32_t f7 = w >> 25;
    auto pick = [&](std::initializer_list<Op> ops, bool match_f7) -> Op {
        for (Op op : ops) {
            const auto& inf = info(op);
            if (inf.funct3 == f3 && (!match_f7 || inf.funct7 == f7)) return op;
        }
        throw IllegalInstruction(w);
    };
    switch (opcode) {
    case kOpcodeVLui: return Op::VLUI;
    case kOpcodeVArith: return pick({Op::VADD, Op::VSUB, Op::VAND, Op::VSL, Op::VSR, Op::VMUL}, false);
    case kOpcodeVTest: return pick({Op::VTEQ, Op::VTNE, Op::VTLT, Op::VTGE}, false);
    case kOpcodeVSel: return pick({Op::VSEL}, false);
    case kOpcodeVShiftImm: return pick({Op::VSLI, Op::VSRI}, false);
    case kOpcodeVSpecial: return pick({Op::VRNG, Op::VANDADD}, false);
    case kOpcodeVLoad: return pick({Op::VLOAD_V, Op::VLOAD_L, Op::VLOAD_R0, Op::VLOAD_R1}, false);
    case kOpcodeVMove: return pick({Op::VEXTRACT, Op::VFILL}, false);
    case kOpcodeVStore: return pick({Op::VSTORE_V, Op::VSTORE_L}, false);
    case 0b0110111: return Op::LUI;
    case 0b0010111: return Op::AUIPC;
    case 0b1101111: return Op::JAL;
    case 0b1100111: return pick({Op::JALR}, false);
    case 0b1100011: return pick({Op::BEQ, Op::BNE, Op::BLT, Op::BGE, Op::BLTU, Op::BGEU}, false);
    case 0b0000011: return pick({Op::LB, Op::LH, Op::LW, Op::LBU, Op::LHU}, false);
    case 0b0100011: return pick({Op::SB, Op::SH, Op::SW}, false);
    case 0b0010011:
        if (f3 == 0b001) {
            if (f7 == 0b0110000 && ((w >> 20) & 0x1F) == 0) return Op::CLZ;
            return pick({Op::SLLI}, true);
        }
        if (f3 == 0b101) return pick({Op::SRLI, Op::SRAI}, true);
        return pick({Op::ADDI, Op::SLTI, Op::SLTIU, Op::XORI, Op::ORI, Op::ANDI}, false);
    case 0b0110011:
        return pick({Op::ADD, Op::SUB, Op::SLL, Op::SLT, Op::SLTU, Op::XOR, Op::SRL, Op::SRA, Op::OR, Op::AND,
                     Op::MUL, Op::MULH, Op::MULHSU, Op::MULHU, Op::DIV, Op::DIVU, Op::REM, Op::REMU},
                    true);
    case 0b0001111: return pick({Op::FENCE}, false);
    case 0b1110011:
        if (w == 0x00000073) return Op::ECALL;
        if (w == 0x00100073) return Op::EBREAK;
        return pick({Op::CSRRW, Op::CSRRS, Op::CSRRC, Op::CSRRWI, Op::CSRRSI, Op::CSRRCI}, false);
    default: throw IllegalInstruction(w);
    }
}

} // namespace

Instr decode(std::uint32_t w) {
    const Op op = find_op(w);
    const auto& inf = info(op);
    Instr i;
    i.op = op;
    const auto rd = static_cast<std::uint8_t>((w >> 7) & 0x1F);
    const auto rs1 = static_cast<std::uint8_t>((w >> 15) & 0x1F);
    const auto rs2 = static_cast<std::uint8_t>((w >> 20) & 0x1F);
    const auto f7 = static_cast<std::uint8_t>(w >> 25);
    switch (inf.fmt) {
    case Fmt::VU:
    case Fmt::U:
        i.rd = rd;
        i.imm = static_cast<std::int32_t>(w >> 12);
        break;
    case Fmt::VR:
        i.rd = rd, i.rs1 = rs1, i.rs2 = rs2, i.funct7 = f7;
        break;
    case Fmt::R:
        i.rd = rd, i.rs1 = rs1, i.rs2 = rs2;
        break;
    case Fmt::Unary:
        i.rd = rd, i.rs1 = rs1;
        break;
    case Fmt::VI:
        i.rd = rd, i.rs1 = rs1;
        // Only the memory forms take a signed offset; the rest are unsigned fields.
        if (op == Op::VLOAD_V || op == Op::VLOAD_L || op == Op::VLOAD_R0 || op == Op::VLOAD_R1)
            i.imm = sign_extend(w >> 20, 12);
        else
            i.imm = static_cast<std::int32_t>(w >> 20);
        break;
    case Fmt::I:
        i.rd = rd, i.rs1 = rs1;
        i.imm = sign_extend(w >> 20, 12);
        break;
    case Fmt::Fence:
    case Fmt::Csr:
    case Fmt::CsrI:
        i.rd = rd, i.rs1 = rs1;
        i.imm = static_cast<std::int32_t>(w >> 20);
        break;
    case Fmt::IShift:
        i.rd = rd, i.rs1 = rs1;
        i.imm = rs2;
        break;
    case Fmt::VS:
    case Fmt::S:
        i.rs1 = rs1, i.rs2 = rs2;
        i.imm = sign_extend((std::uint32_t{f7} << 5) | rd, 12);
        break;
    case Fmt::B:
        i.rs1 = rs1, i.rs2 = rs2;
        i.imm = sign_extend(((w >> 31) << 12) | (((w >> 7) & 1) << 11) | (((w >> 25) & 0x3F) << 5) |
                                (((w >> 8) & 0xF) << 1),
                            13);
        break;
    case Fmt::J:
        i.rd = rd;
        i.imm = sign_extend(((w >> 31) << 20) | (((w >> 12) & 0xFF) << 12) | (((w >> 20) & 1) << 11) |
                                (((w >> 21) & 0x3FF) << 1),
                            21);
        break;
    case Fmt::Sys: break;
    }
    try {
        validate(i);
    } catch (const EncodeError&) {
        throw IllegalInstruction(w);
    }
    // Fields outside the canonical layout (e.g. stray rs2 bits in an I-type
    // vector word) must round-trip exactly.
    if (encode(i) != w) throw IllegalInstruction(w);
    return i;
}

Instr make_r(Op op, int rd, int rs1, int rs2, int funct7) {
    Instr i;
    i.op = op;
    i.rd = static_cast<std::uint8_t>(rd);
    i.rs1 = static_cast<std::uint8_t>(rs1);
    i.rs2 = static_cast<std::uint8_t>(rs2);
    i.funct7 = static_cast<std::uint8_t>(funct7);
    return i;
}

Instr make_i(Op op, int rd, int rs1, std::int32_t imm) {
    Instr i;
    i.op = op;
    i.rd = static_cast<std::uint8_t>(rd);
    i.rs1 = static_cast<std::uint8_t>(rs1);
    i.imm = imm;
    return i;
}

Instr make_s(Op op, int rs1, int rs2, std::int32_t imm) {
    Instr i;
    i.op = op;
    i.rs1 = static_cast<std::uint8_t>(rs1);
    i.rs2 = static_cast<std::uint8_t>(rs2);
    i.imm = imm;
    return i;
}

Instr vmul(int rd, int rs1, int rs2, int shift, RoundMode mode) {
    return make_r(Op::VMUL, rd, rs1, rs2, (static_cast<int>(mode) << 4) | shift);
}

Instr vsri(int rd, int rs1, int shift, RoundMode mode) {
    return make_i(Op::VSRI, rd, rs1, (static_cast<int>(mode) << 4) | shift);
}

RegUse reg_use(const Instr& i) {
    RegUse u;
    auto v = [](int r) { return 1u << r; };
    switch (i.op) {
    case Op::VLUI: u.vwrite = i.rd; break;
    case Op::VADD:
    case Op::VSUB:
    case Op::VAND:
    case Op::VSL:
    case Op::VSR:
    case Op::VMUL:
        u.vreads = v(i.rs1) | v(i.rs2);
        u.vwrite = i.rd;
        break;
    case Op::VTEQ:
    case Op::VTNE:
    case Op::VTLT:
    case Op::VTGE:
        u.vreads = v(i.rs1) | v(i.rs2);
        u.xwrite = i.rd;
        break;
    case Op::VSEL:
        u.vreads = v(i.rs2) | v(i.rd);
        u.xreads = v(i.rs1);
        u.vwrite = i.rd;
        break;
    case Op::VSLI:
    case Op::VSRI:
        u.vreads = v(i.rs1);
        u.vwrite = i.rd;
        break;
    case Op::VRNG: u.vwrite = i.rd; break;
    case Op::VANDADD:
        u.vreads = v(i.rs1);
        u.xreads = v(i.rs2);
        u.vwrite = i.rd;
        break;
    case Op::VLOAD_V:
        u.xreads = v(i.rs1);
        u.vwrite = i.rd;
        u.vector_load = true;
        break;
    case Op::VLOAD_L:
        u.vreads = v(i.rs1);
        u.vwrite = i.rd;
        u.vector_load = true;
        break;
    case Op::VLOAD_R0:
    case Op::VLOAD_R1: u.xreads = v(i.rs1); break;
    case Op::VEXTRACT:
        u.vreads = v(i.rs1);
        u.xwrite = i.rd;
        break;
    case Op::VFILL:
        u.xreads = v(i.rs1);
        u.vwrite = i.rd;
        break;
    case Op::VSTORE_V:
        u.xreads = v(i.rs1);
        u.vreads = v(i.rs2);
        break;
    case Op::VSTORE_L: u.vreads = v(i.rs1) | v(i.rs2); break;

    case Op::LUI:
    case Op::AUIPC:
    case Op::JAL: u.xwrite = i.rd; break;
    case Op::JALR:
    case Op::ADDI:
    case Op::SLTI:
    case Op::SLTIU:
    case Op::XORI:
    case Op::ORI:
    case Op::ANDI:
    case Op::SLLI:
    case Op::SRLI:
    case Op::SRAI:
    case Op::CLZ:
    case Op::CSRRW:
    case Op::CSRRS:
    case Op::CSRRC:
        u.xreads = v(i.rs1);
        u.xwrite = i.rd;
        break;
    case Op::CSRRWI:
    case Op::CSRRSI:
    case Op::CSRRCI: u.xwrite = i.rd; break;
    case Op::LB:
    case Op::LH:
    case Op::LW:
    case Op::LBU:
    case Op::LHU:
        u.xreads = v(i.rs1);
        u.xwrite = i.rd;
        u.scalar_load = true;
        break;
    case Op::BEQ:
    case Op::BNE:
    case Op::BLT:
    case Op::BGE:
    case Op::BLTU:
    case Op::BGEU:
    case Op::SB:
    case Op::SH:
    case Op::SW: u.xreads = v(i.rs1) | v(i.rs2); break;
    case Op::FENCE:
    case Op::ECALL:
    case Op::EBREAK: break;
    default:
        u.xreads = v(i.rs1) | v(i.rs2);
        u.xwrite = i.rd;
        break;
    }
    if (u.xwrite == 0) u.xwrite = -1;
    u.xreads &= ~1u;
    return u;
}

} // namespace fenn
