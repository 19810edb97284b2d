// SPDX-License-Identifier: Apache-2.0
#include "fenn/assembler.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "fenn/csr.hpp"

namespace fenn {

namespace csr {

std::optional<std::uint16_t> lookup(std::string_view name) {
    static const std::unordered_map<std::string_view, std::uint16_t> names = {
        {"dma_ext_addr", kDmaExtAddr}, {"dma_local_addr", kDmaLocalAddr}, {"dma_bytes", kDmaBytes},
        {"dma_ctrl", kDmaCtrl},        {"dma_status", kDmaStatus},        {"perf_region", kPerfRegion},
        {"mcycle", kMcycle},           {"minstret", kMinstret},           {"mcycleh", kMcycleH},
        {"minstreth", kMinstretH},     {"cycle", kMcycle},                {"instret", kMinstret},
    };
    const auto it = names.find(name);
    if (it == names.end()) return std::nullopt;
    return it->second;
}

} // namespace csr

AsmError::AsmError(int l, const std::string& message) : std::runtime_error(fmt::format("line {}: {}", l, message)), line(l) {}

namespace {

constexpr std::array<const char*, 32> kAbiNames = {
    "zero", "ra", "sp", "gp", "tp",  "t0",  "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4", "a5",
    "a6",   "a7", "s2", "s3", "s4",  "s5",  "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6"};

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$'; }

std::optional<int> parse_xreg(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && s[0] == 'x') {
        int r = -1;
        const auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), r);
        if (ec == std::errc{} && p == s.data() + s.size() && r >= 0 && r < 32) return r;
    }
    if (s == "fp") return 8;
    for (int r = 0; r < 32; ++r)
        if (s == kAbiNames[r]) return r;
    return std::nullopt;
}

std::optional<int> parse_vreg(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && s[0] == 'v') {
        int r = -1;
        const auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), r);
        if (ec == std::errc{} && p == s.data() + s.size() && r >= 0 && r < 32) return r;
    }
    return std::nullopt;
}

std::vector<std::string> split_operands(std::string_view s) {
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            out.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.emplace_back(trim(cur));
    return out;
}

struct Stmt {
    int line = 0;
    std::string mnem;
    std::vector<std::string> ops;
    Space space = Space::Imem;
    int lane = kAllLanes;
    std::uint32_t addr = 0;
    int size = 0; // bytes, or halfwords in lane-local memory
};

struct LocalDef {
    std::size_t stmt;
    std::uint32_t addr;
};

class Assembler {
public:
    ProgramImage run(std::string_view source) {
        parse(source);
        pass2();
        return finish();
    }

private:
    std::vector<Stmt> stmts_;
    std::map<std::string, Symbol> symbols_;
    std::unordered_map<std::string, std::vector<LocalDef>> locals_;
    std::array<std::uint32_t, 5> loc_{};
    Space space_ = Space::Imem;
    int lane_ = kAllLanes;
    std::size_t cur_stmt_ = 0;
    int cur_line_ = 0;
    bool final_pass_ = false;
    // (space, lane) -> address -> byte
    std::map<std::pair<int, int>, std::map<std::uint32_t, std::uint8_t>> data_;

    [[noreturn]] void fail(const std::string& msg) const { throw AsmError(cur_line_, msg); }

    // ---- expressions ----------------------------------------------------

    struct Eval {
        std::int64_t value = 0;
        bool known = true;
        bool symbolic = false;
    };

    Eval eval(std::string_view text) {
        text = trim(text);
        if (text.empty()) fail("missing operand");
        if (text.starts_with("%hi(") || text.starts_with("%lo(")) {
            if (text.back() != ')') fail(fmt::format("malformed '{}'", text));
            Eval e = eval(text.substr(4, text.size() - 5));
            const auto v = static_cast<std::uint32_t>(e.value);
            if (text[1] == 'h')
                e.value = ((v + 0x800u) >> 12) & 0xFFFFFu;
            else
                e.value = static_cast<std::int32_t>(v << 20) >> 20;
            return e;
        }
        Eval total;
        std::size_t i = 0;
        int sign = 1;
        bool expect_term = true;
        while (i < text.size()) {
            const char c = text[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
                continue;
            }
            if (expect_term && (c == '-' || c == '+')) {
                if (c == '-') sign = -sign;
                ++i;
                continue;
            }
            if (!expect_term) {
                if (c == '+') sign = 1;
                else if (c == '-') sign = -1;
                else fail(fmt::format("unexpected '{}' in expression '{}'", c, text));
                ++i;
                expect_term = true;
                continue;
            }
            std::size_t j = i;
            if (std::isdigit(static_cast<unsigned char>(c))) {
                while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
                const auto term = text.substr(i, j - i);
                Eval t = term_number_or_local(term);
                total.value += sign * t.value;
                total.known &= t.known;
                total.symbolic |= t.symbolic;
            } else if (c == '\'' && i + 2 < text.size() && text[i + 2] == '\'') {
                total.value += sign * static_cast<unsigned char>(text[i + 1]);
                j = i + 3;
            } else if (is_ident_start(c)) {
                while (j < text.size() && is_ident_char(text[j])) ++j;
                const std::string name(text.substr(i, j - i));
                total.symbolic = true;
                if (name == ".") {
                    total.value += sign * static_cast<std::int64_t>(stmts_[cur_stmt_].addr);
                } else if (auto it = symbols_.find(name); it != symbols_.end()) {
                    total.value += sign * static_cast<std::int64_t>(it->second.value);
                } else {
                    if (final_pass_) fail(fmt::format("undefined label '{}'", name));
                    total.known = false;
                }
            } else {
                fail(fmt::format("unexpected '{}' in expression '{}'", c, text));
            }
            i = j;
            sign = 1;
            expect_term = false;
        }
        if (expect_term) fail(fmt::format("incomplete expression '{}'", text));
        return total;
    }

    Eval term_number_or_local(std::string_view term) {
        // numeric local label reference: 1b / 1f
        if (term.size() >= 2 && (term.back() == 'b' || term.back() == 'f') &&
            std::all_of(term.begin(), term.end() - 1, [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
            const std::string name(term.substr(0, term.size() - 1));
            Eval e;
            e.symbolic = true;
            const auto it = locals_.find(name);
            if (it != locals_.end()) {
                const auto& defs = it->second;
                if (term.back() == 'b') {
                    for (auto d = defs.rbegin(); d != defs.rend(); ++d)
                        if (d->stmt <= cur_stmt_) {
                            e.value = d->addr;
                            return e;
                        }
                } else {
                    for (const auto& d : defs)
                        if (d.stmt > cur_stmt_) {
                            e.value = d.addr;
                            return e;
                        }
                }
            }
            if (final_pass_) fail(fmt::format("undefined label '{}'", term));
            e.known = false;
            return e;
        }
        std::int64_t v = 0;
        int base = 10;
        std::string_view digits = term;
        if (term.size() > 2 && term[0] == '0' && (term[1] == 'x' || term[1] == 'X')) {
            base = 16;
            digits = term.substr(2);
        } else if (term.size() > 2 && term[0] == '0' && (term[1] == 'b' || term[1] == 'B')) {
            base = 2;
            digits = term.substr(2);
        }
        const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, base);
        if (ec != std::errc{} || p != digits.data() + digits.size()) fail(fmt::format("bad number '{}'", term));
        return {v, true, false};
    }

    std::int64_t value(std::string_view text) { return eval(text).value; }

    // ---- operand helpers -------------------------------------------------

    int xreg(const std::string& s) {
        if (auto r = parse_xreg(s)) return *r;
        fail(fmt::format("expected scalar register, got '{}'", s));
    }

    int vreg(const std::string& s) {
        if (auto r = parse_vreg(s)) return *r;
        fail(fmt::format("expected vector register, got '{}'", s));
    }

    std::pair<std::string, std::string> mem_operand(const std::string& s) {
        const auto open = s.rfind('(');
        if (open == std::string::npos || s.back() != ')') fail(fmt::format("expected offset(register), got '{}'", s));
        std::string off(trim(std::string_view(s).substr(0, open)));
        std::string reg(trim(std::string_view(s).substr(open + 1, s.size() - open - 2)));
        if (off.empty()) off = "0";
        return {off, reg};
    }

    void want(const Stmt& st, std::size_t n) {
        if (st.ops.size() != n) fail(fmt::format("'{}' expects {} operand(s), got {}", st.mnem, n, st.ops.size()));
    }

    std::int32_t pc_relative(const std::string& op, std::uint32_t pc) {
        const Eval e = eval(op);
        if (!e.symbolic) return static_cast<std::int32_t>(e.value);
        return static_cast<std::int32_t>(e.value - static_cast<std::int64_t>(pc));
    }

    int csr_number(const std::string& s) {
        if (auto c = csr::lookup(lower(s))) return *c;
        return static_cast<int>(value(s));
    }

    // ---- instruction expansion -----------------------------------------

    static bool fits12(std::int64_t v) { return v >= -2048 && v <= 2047; }

    /// Number of machine words a statement expands to, decided in pass 1.
    int instr_count(const Stmt& st) {
        if (st.mnem == "li") {
            if (st.ops.size() != 2) return 1;
            const Eval e = eval(st.ops[1]);
            return (e.known && fits12(e.value)) ? 1 : 2;
        }
        if (st.mnem == "la" || st.mnem == "call") return st.mnem == "la" ? 2 : 1;
        return 1;
    }

    static std::optional<RoundMode> round_suffix(std::string_view suffix) {
        if (suffix.empty() || suffix == "rz") return RoundMode::ToZero;
        if (suffix == "rn") return RoundMode::ToNearest;
        if (suffix == "rs") return RoundMode::Stochastic;
        return std::nullopt;
    }

    std::vector<Instr> expand(const Stmt& st) {
        const std::string& m = st.mnem;
        const auto& o = st.ops;
        const std::uint32_t pc = st.addr;
        std::string base = m;
        std::string suffix;
        if (const auto dot = m.find('.'); dot != std::string::npos && m[0] == 'v' && !m.starts_with("vload") &&
                                            !m.starts_with("vstore")) {
            base = m.substr(0, dot);
            suffix = m.substr(dot + 1);
        }
        auto imm = [&](const std::string& s) { return static_cast<std::int32_t>(value(s)); };

        // Vector instructions
        static const std::unordered_map<std::string, Op> varith = {
            {"vadd", Op::VADD}, {"vsub", Op::VSUB}, {"vand", Op::VAND}, {"vsl", Op::VSL}, {"vsr", Op::VSR}};
        static const std::unordered_map<std::string, Op> vtest = {
            {"vteq", Op::VTEQ}, {"vtne", Op::VTNE}, {"vtlt", Op::VTLT}, {"vtge", Op::VTGE}};
        if (auto it = varith.find(base); it != varith.end()) {
            want(st, 3);
            int f7 = 0;
            if (suffix == "s" && (it->second == Op::VADD || it->second == Op::VSUB)) f7 = 0x40;
            else if (!suffix.empty()) fail(fmt::format("unknown mnemonic '{}'", m));
            return {make_r(it->second, vreg(o[0]), vreg(o[1]), vreg(o[2]), f7)};
        }
        if (base == "vmul") {
            const auto mode = round_suffix(suffix);
            if (!mode) fail(fmt::format("unknown mnemonic '{}'", m));
            if (o.size() != 3 && o.size() != 4) fail("'vmul' expects vd, va, vb[, shift]");
            const int sh = o.size() == 4 ? imm(o[3]) : 0;
            if (sh < 0 || sh > 15) fail("vmul shift must be 0..15");
            return {vmul(vreg(o[0]), vreg(o[1]), vreg(o[2]), sh, *mode)};
        }
        if (auto it = vtest.find(m); it != vtest.end()) {
            want(st, 3);
            return {make_r(it->second, xreg(o[0]), vreg(o[1]), vreg(o[2]))};
        }
        if (m == "vsel") {
            want(st, 3);
            return {make_r(Op::VSEL, vreg(o[0]), xreg(o[1]), vreg(o[2]))};
        }
        if (m == "vsli") {
            want(st, 3);
            return {make_i(Op::VSLI, vreg(o[0]), vreg(o[1]), imm(o[2]))};
        }
        if (base == "vsri") {
            const auto mode = round_suffix(suffix);
            if (!mode) fail(fmt::format("unknown mnemonic '{}'", m));
            want(st, 3);
            const int sh = imm(o[2]);
            if (sh < 0 || sh > 15) fail("vsri shift must be 0..15");
            return {vsri(vreg(o[0]), vreg(o[1]), sh, *mode)};
        }
        if (m == "vrng") {
            want(st, 1);
            return {make_r(Op::VRNG, vreg(o[0]), 0, 0)};
        }
        if (m == "vandadd") {
            want(st, 4);
            return {make_r(Op::VANDADD, vreg(o[0]), vreg(o[1]), xreg(o[2]), imm(o[3]))};
        }
        if (m == "vlui") {
            want(st, 2);
            std::int64_t v = value(o[1]);
            if (v < -32768 || v > 65535) fail("vlui immediate out of 16-bit range");
            return {make_i(Op::VLUI, vreg(o[0]), 0, static_cast<std::int32_t>(v & 0xFFFF))};
        }
        if (m == "vload.v" || m == "vload.l") {
            want(st, 2);
            const auto [off, reg] = mem_operand(o[1]);
            const bool local = m == "vload.l";
            return {make_i(local ? Op::VLOAD_L : Op::VLOAD_V, vreg(o[0]), local ? vreg(reg) : xreg(reg), imm(off))};
        }
        if (m == "vload.r0" || m == "vload.r1") {
            want(st, 1);
            const auto [off, reg] = mem_operand(o[0]);
            return {make_i(m == "vload.r0" ? Op::VLOAD_R0 : Op::VLOAD_R1, 0, xreg(reg), imm(off))};
        }
        if (m == "vextract") {
            want(st, 3);
            return {make_i(Op::VEXTRACT, xreg(o[0]), vreg(o[1]), imm(o[2]))};
        }
        if (m == "vfill") {
            want(st, 2);
            return {make_i(Op::VFILL, vreg(o[0]), xreg(o[1]), 0)};
        }
        if (m == "vstore.v" || m == "vstore.l") {
            want(st, 2);
            const auto [off, reg] = mem_operand(o[1]);
            const bool local = m == "vstore.l";
            return {make_s(local ? Op::VSTORE_L : Op::VSTORE_V, local ? vreg(reg) : xreg(reg), vreg(o[0]), imm(off))};
        }

        // Scalar instructions
        static const std::unordered_map<std::string, Op> rtype = {
            {"add", Op::ADD},   {"sub", Op::SUB},   {"sll", Op::SLL},       {"slt", Op::SLT},     {"sltu", Op::SLTU},
            {"xor", Op::XOR},   {"srl", Op::SRL},   {"sra", Op::SRA},       {"or", Op::OR},       {"and", Op::AND},
            {"mul", Op::MUL},   {"mulh", Op::MULH}, {"mulhsu", Op::MULHSU}, {"mulhu", Op::MULHU}, {"div", Op::DIV},
            {"divu", Op::DIVU}, {"rem", Op::REM},   {"remu", Op::REMU}};
        static const std::unordered_map<std::string, Op> itype = {
            {"addi", Op::ADDI}, {"slti", Op::SLTI}, {"sltiu", Op::SLTIU}, {"xori", Op::XORI},
            {"ori", Op::ORI},   {"andi", Op::ANDI}, {"slli", Op::SLLI},   {"srli", Op::SRLI}, {"srai", Op::SRAI}};
        static const std::unordered_map<std::string, Op> loads = {
            {"lb", Op::LB}, {"lh", Op::LH}, {"lw", Op::LW}, {"lbu", Op::LBU}, {"lhu", Op::LHU}};
        static const std::unordered_map<std::string, Op> stores = {{"sb", Op::SB}, {"sh", Op::SH}, {"sw", Op::SW}};
        static const std::unordered_map<std::string, Op> branches = {
            {"beq", Op::BEQ}, {"bne", Op::BNE}, {"blt", Op::BLT}, {"bge", Op::BGE}, {"bltu", Op::BLTU}, {"bgeu", Op::BGEU}};
        static const std::unordered_map<std::string, Op> csrs = {
            {"csrrw", Op::CSRRW}, {"csrrs", Op::CSRRS}, {"csrrc", Op::CSRRC}};
        static const std::unordered_map<std::string, Op> csris = {
            {"csrrwi", Op::CSRRWI}, {"csrrsi", Op::CSRRSI}, {"csrrci", Op::CSRRCI}};

        if (auto it = rtype.find(m); it != rtype.end()) {
            want(st, 3);
            return {make_r(it->second, xreg(o[0]), xreg(o[1]), xreg(o[2]))};
        }
        if (auto it = itype.find(m); it != itype.end()) {
            want(st, 3);
            return {make_i(it->second, xreg(o[0]), xreg(o[1]), imm(o[2]))};
        }
        if (auto it = loads.find(m); it != loads.end()) {
            want(st, 2);
            const auto [off, reg] = mem_operand(o[1]);
            return {make_i(it->second, xreg(o[0]), xreg(reg), imm(off))};
        }
        if (auto it = stores.find(m); it != stores.end()) {
            want(st, 2);
            const auto [off, reg] = mem_operand(o[1]);
            return {make_s(it->second, xreg(reg), xreg(o[0]), imm(off))};
        }
        if (auto it = branches.find(m); it != branches.end()) {
            want(st, 3);
            return {make_s(it->second, xreg(o[0]), xreg(o[1]), pc_relative(o[2], pc))};
        }
        if (auto it = csrs.find(m); it != csrs.end()) {
            want(st, 3);
            return {make_i(it->second, xreg(o[0]), xreg(o[2]), csr_number(o[1]))};
        }
        if (auto it = csris.find(m); it != csris.end()) {
            want(st, 3);
            return {make_i(it->second, xreg(o[0]), imm(o[2]), csr_number(o[1]))};
        }
        if (m == "lui" || m == "auipc") {
            want(st, 2);
            return {make_i(m == "lui" ? Op::LUI : Op::AUIPC, xreg(o[0]), 0, imm(o[1]))};
        }
        if (m == "jal") {
            if (o.size() == 1) return {make_i(Op::JAL, 1, 0, pc_relative(o[0], pc))};
            want(st, 2);
            return {make_i(Op::JAL, xreg(o[0]), 0, pc_relative(o[1], pc))};
        }
        if (m == "jalr") {
            if (o.size() == 1) return {make_i(Op::JALR, 1, xreg(o[0]), 0)};
            want(st, 2);
            const auto [off, reg] = mem_operand(o[1]);
            return {make_i(Op::JALR, xreg(o[0]), xreg(reg), imm(off))};
        }
        if (m == "clz") {
            want(st, 2);
            return {make_r(Op::CLZ, xreg(o[0]), xreg(o[1]), 0)};
        }
        if (m == "ecall" || m == "ebreak") {
            want(st, 0);
            Instr i;
            i.op = m == "ecall" ? Op::ECALL : Op::EBREAK;
            return {i};
        }
        if (m == "fence") {
            return {make_i(Op::FENCE, 0, 0, o.empty() ? 0xFF : imm(o[0]))};
        }

        // Pseudo-instructions
        if (m == "nop") return {make_i(Op::ADDI, 0, 0, 0)};
        if (m == "mv") {
            want(st, 2);
            return {make_i(Op::ADDI, xreg(o[0]), xreg(o[1]), 0)};
        }
        if (m == "not") {
            want(st, 2);
            return {make_i(Op::XORI, xreg(o[0]), xreg(o[1]), -1)};
        }
        if (m == "neg") {
            want(st, 2);
            return {make_r(Op::SUB, xreg(o[0]), 0, xreg(o[1]))};
        }
        if (m == "li") {
            want(st, 2);
            const int rd = xreg(o[0]);
            const std::int64_t v = value(o[1]);
            if (v < INT32_MIN || v > UINT32_MAX) fail("li immediate out of 32-bit range");
            const auto u = static_cast<std::uint32_t>(v);
            if (st.size == 4) {
                if (!fits12(static_cast<std::int32_t>(u))) fail("li immediate out of range");
                return {make_i(Op::ADDI, rd, 0, static_cast<std::int32_t>(u))};
            }
            const auto hi = static_cast<std::int32_t>(((u + 0x800u) >> 12) & 0xFFFFFu);
            const std::int32_t lo = static_cast<std::int32_t>(u << 20) >> 20;
            return {make_i(Op::LUI, rd, 0, hi), make_i(Op::ADDI, rd, rd, lo)};
        }
        if (m == "la") {
            want(st, 2);
            const int rd = xreg(o[0]);
            const auto u = static_cast<std::uint32_t>(value(o[1]));
            const auto hi = static_cast<std::int32_t>(((u + 0x800u) >> 12) & 0xFFFFFu);
            const std::int32_t lo = static_cast<std::int32_t>(u << 20) >> 20;
            return {make_i(Op::LUI, rd, 0, hi), make_i(Op::ADDI, rd, rd, lo)};
        }
        if (m == "j") {
            want(st, 1);
            return {make_i(Op::JAL, 0, 0, pc_relative(o[0], pc))};
        }
        if (m == "call") {
            want(st, 1);
            return {make_i(Op::JAL, 1, 0, pc_relative(o[0], pc))};
        }
        if (m == "jr") {
            want(st, 1);
            return {make_i(Op::JALR, 0, xreg(o[0]), 0)};
        }
        if (m == "ret") {
            want(st, 0);
            return {make_i(Op::JALR, 0, 1, 0)};
        }
        static const std::unordered_map<std::string, std::pair<Op, bool>> zbranch = {
            {"beqz", {Op::BEQ, false}}, {"bnez", {Op::BNE, false}}, {"bltz", {Op::BLT, false}},
            {"bgez", {Op::BGE, false}}, {"blez", {Op::BGE, true}},  {"bgtz", {Op::BLT, true}}};
        if (auto it = zbranch.find(m); it != zbranch.end()) {
            want(st, 2);
            const int r = xreg(o[0]);
            const auto off = pc_relative(o[1], pc);
            return {it->second.second ? make_s(it->second.first, 0, r, off) : make_s(it->second.first, r, 0, off)};
        }
        static const std::unordered_map<std::string, Op> swapped = {
            {"bgt", Op::BLT}, {"ble", Op::BGE}, {"bgtu", Op::BLTU}, {"bleu", Op::BGEU}};
        if (auto it = swapped.find(m); it != swapped.end()) {
            want(st, 3);
            return {make_s(it->second, xreg(o[1]), xreg(o[0]), pc_relative(o[2], pc))};
        }
        if (m == "csrr") {
            want(st, 2);
            return {make_i(Op::CSRRS, xreg(o[0]), 0, csr_number(o[1]))};
        }
        if (m == "csrw" || m == "csrs" || m == "csrc") {
            want(st, 2);
            const Op op = m == "csrw" ? Op::CSRRW : (m == "csrs" ? Op::CSRRS : Op::CSRRC);
            return {make_i(op, 0, xreg(o[1]), csr_number(o[0]))};
        }
        if (m == "csrwi" || m == "csrsi" || m == "csrci") {
            want(st, 2);
            const Op op = m == "csrwi" ? Op::CSRRWI : (m == "csrsi" ? Op::CSRRSI : Op::CSRRCI);
            return {make_i(op, 0, imm(o[1]), csr_number(o[0]))};
        }
        fail(fmt::format("unknown mnemonic '{}'", m));
    }

    // ---- pass 1 -----------------------------------------------------------

    void define_label(const std::string& name, std::size_t stmt_index) {
        const std::uint32_t addr = loc_[static_cast<int>(space_)];
        if (std::all_of(name.begin(), name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            locals_[name].push_back({stmt_index, addr});
            return;
        }
        if (symbols_.contains(name)) fail(fmt::format("duplicate label '{}'", name));
        symbols_[name] = Symbol{space_, addr};
    }

    void switch_space(Space s, const std::vector<std::string>& ops) {
        space_ = s;
        lane_ = kAllLanes;
        if (!ops.empty()) loc_[static_cast<int>(s)] = static_cast<std::uint32_t>(value(ops[0]));
    }

    void parse(std::string_view source) {
        std::size_t pos = 0;
        int line_no = 0;
        while (pos <= source.size()) {
            const auto nl = source.find('\n', pos);
            std::string_view line = source.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            pos = nl == std::string_view::npos ? source.size() + 1 : nl + 1;
            cur_line_ = ++line_no;
            if (const auto c = line.find('#'); c != std::string_view::npos) line = line.substr(0, c);
            if (const auto c = line.find("//"); c != std::string_view::npos) line = line.substr(0, c);
            line = trim(line);
            // labels
            while (!line.empty()) {
                std::size_t j = 0;
                while (j < line.size() && is_ident_char(line[j])) ++j;
                if (j > 0 && j < line.size() && line[j] == ':') {
                    cur_stmt_ = stmts_.size();
                    define_label(std::string(line.substr(0, j)), stmts_.size());
                    line = trim(line.substr(j + 1));
                } else {
                    break;
                }
            }
            if (line.empty()) continue;
            std::size_t j = 0;
            while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
            Stmt st;
            st.line = line_no;
            st.mnem = lower(line.substr(0, j));
            st.ops = split_operands(trim(line.substr(j)));
            st.space = space_;
            st.lane = lane_;
            st.addr = loc_[static_cast<int>(space_)];
            cur_stmt_ = stmts_.size();
            stmts_.push_back(st);
            Stmt& s = stmts_.back();
            if (s.mnem.front() == '.') {
                directive_pass1(s);
            } else {
                if (space_ != Space::Imem) fail("instructions are only allowed in .text");
                s.size = 4 * instr_count(s);
            }
            loc_[static_cast<int>(space_)] += static_cast<std::uint32_t>(s.size);
        }
    }

    int unit() const { return space_ == Space::Llm ? 2 : 1; }

    void directive_pass1(Stmt& s) {
        const std::string& d = s.mnem;
        if (d == ".text") switch_space(Space::Imem, s.ops);
        else if (d == ".data") switch_space(Space::Dmem, s.ops);
        else if (d == ".vdata") switch_space(Space::Vmem, s.ops);
        else if (d == ".lldata") switch_space(Space::Llm, s.ops);
        else if (d == ".globl" || d == ".global") return;
        else if (d == ".equ" || d == ".set") {
            if (s.ops.size() != 2) fail(".equ expects name, value");
            const Eval e = eval(s.ops[1]);
            if (!e.known) fail(fmt::format(".equ '{}' uses an undefined symbol", s.ops[0]));
            symbols_[s.ops[0]] = Symbol{space_, static_cast<std::uint32_t>(e.value)};
        } else if (d == ".lane") {
            if (space_ != Space::Llm) fail(".lane is only valid in .lldata");
            if (s.ops.size() != 1) fail(".lane expects a lane number or 'all'");
            if (s.ops[0] == "all") lane_ = kAllLanes;
            else {
                const auto l = value(s.ops[0]);
                if (l < 0 || l > 31) fail("lane must be 0..31");
                lane_ = static_cast<int>(l);
            }
        } else if (d == ".org") {
            if (s.ops.size() != 1) fail(".org expects an address");
            loc_[static_cast<int>(space_)] = static_cast<std::uint32_t>(value(s.ops[0]));
            s.addr = loc_[static_cast<int>(space_)];
        } else if (d == ".align") {
            if (s.ops.size() != 1) fail(".align expects a power of two exponent");
            const auto p = value(s.ops[0]);
            if (p < 0 || p > 16) fail(".align exponent out of range");
            const std::uint32_t a = 1u << p;
            const std::uint32_t cur = loc_[static_cast<int>(space_)];
            s.size = static_cast<int>(((cur + a - 1) & ~(a - 1)) - cur);
        } else if (d == ".space" || d == ".zero") {
            if (s.ops.size() != 1) fail(".space expects a size");
            s.size = static_cast<int>(value(s.ops[0]));
        } else if (d == ".word") {
            s.size = static_cast<int>(s.ops.size()) * 4 / unit();
        } else if (d == ".half") {
            s.size = static_cast<int>(s.ops.size()) * 2 / unit();
        } else if (d == ".byte") {
            if (space_ == Space::Llm) fail(".byte is not valid in lane-local memory");
            s.size = static_cast<int>(s.ops.size());
        } else {
            fail(fmt::format("unknown directive '{}'", d));
        }
        if (space_ == Space::Imem && (d == ".half" || d == ".byte")) fail(fmt::format("{} is not valid in .text", d));
    }

    // ---- pass 2 -----------------------------------------------------------

    void emit(Space space, int lane, std::uint32_t addr, std::uint64_t v, int bytes) {
        auto& bucket = data_[{static_cast<int>(space), lane}];
        for (int b = 0; b < bytes; ++b) bucket[addr + static_cast<std::uint32_t>(b)] = static_cast<std::uint8_t>(v >> (8 * b));
    }

    void pass2() {
        final_pass_ = true;
        for (cur_stmt_ = 0; cur_stmt_ < stmts_.size(); ++cur_stmt_) {
            const Stmt& s = stmts_[cur_stmt_];
            cur_line_ = s.line;
            // LLM addresses count halfwords; the byte map stores them at 2*addr.
            const std::uint32_t byte_addr = s.space == Space::Llm ? s.addr * 2 : s.addr;
            if (s.mnem.front() == '.') {
                if (s.mnem == ".word" || s.mnem == ".half" || s.mnem == ".byte") {
                    const int width = s.mnem == ".word" ? 4 : (s.mnem == ".half" ? 2 : 1);
                    for (std::size_t k = 0; k < s.ops.size(); ++k)
                        emit(s.space, s.lane, byte_addr + static_cast<std::uint32_t>(k * width),
                             static_cast<std::uint64_t>(value(s.ops[k])), width);
                } else if (s.mnem == ".space" || s.mnem == ".zero" || (s.mnem == ".align" && s.space != Space::Imem)) {
                    const int bytes = s.size * (s.space == Space::Llm ? 2 : 1);
                    for (int k = 0; k < bytes; ++k) emit(s.space, s.lane, byte_addr + static_cast<std::uint32_t>(k), 0, 1);
                } else if (s.mnem == ".align" && s.space == Space::Imem) {
                    for (int k = 0; k < s.size; k += 4) emit(s.space, kAllLanes, byte_addr + static_cast<std::uint32_t>(k), encode(make_i(Op::ADDI, 0, 0, 0)), 4);
                }
                continue;
            }
            const auto instrs = expand(s);
            if (static_cast<int>(instrs.size()) * 4 != s.size) fail("internal: instruction size changed between passes");
            for (std::size_t k = 0; k < instrs.size(); ++k) {
                std::uint32_t w = 0;
                try {
                    w = encode(instrs[k]);
                } catch (const EncodeError& e) {
                    fail(e.what());
                }
                emit(Space::Imem, kAllLanes, s.addr + static_cast<std::uint32_t>(4 * k), w, 4);
            }
        }
    }

    ProgramImage finish() {
        ProgramImage image;
        for (const auto& [key, bytes] : data_) {
            Section cur;
            bool open = false;
            std::uint32_t next = 0;
            for (const auto& [addr, b] : bytes) {
                if (!open || addr != next) {
                    if (open) image.sections.push_back(std::move(cur));
                    cur = Section{};
                    cur.space = static_cast<Space>(key.first);
                    cur.lane = key.second;
                    cur.base = cur.space == Space::Llm ? addr / 2 : addr;
                    open = true;
                }
                cur.bytes.push_back(b);
                next = addr + 1;
            }
            if (open) image.sections.push_back(std::move(cur));
        }
        image.symbols = symbols_;
        if (auto it = symbols_.find("_start"); it != symbols_.end()) image.entry = it->second.value;
        return image;
    }
};

std::string vname(int r) { return fmt::format("v{}", r); }

const char* round_suffix_text(RoundMode m) {
    switch (m) {
    case RoundMode::ToZero: return "";
    case RoundMode::ToNearest: return ".rn";
    case RoundMode::Stochastic: return ".rs";
    }
    return "";
}

} // namespace

ProgramImage assemble(std::string_view source) { return Assembler{}.run(source); }

std::string xreg_name(int r) { return kAbiNames.at(static_cast<std::size_t>(r)); }

std::string disassemble(const Instr& i) {
    const auto m = mnemonic(i.op);
    const auto x = [](int r) { return xreg_name(r); };
    switch (i.op) {
    case Op::VLUI: return fmt::format("vlui {}, {}", vname(i.rd), i.imm);
    case Op::VADD:
    case Op::VSUB: return fmt::format("{}{} {}, {}, {}", m, i.saturating() ? ".s" : "", vname(i.rd), vname(i.rs1), vname(i.rs2));
    case Op::VAND:
    case Op::VSL:
    case Op::VSR: return fmt::format("{} {}, {}, {}", m, vname(i.rd), vname(i.rs1), vname(i.rs2));
    case Op::VMUL:
        return fmt::format("vmul{} {}, {}, {}, {}", round_suffix_text(i.round_mode()), vname(i.rd), vname(i.rs1),
                           vname(i.rs2), i.shift());
    case Op::VTEQ:
    case Op::VTNE:
    case Op::VTLT:
    case Op::VTGE: return fmt::format("{} {}, {}, {}", m, x(i.rd), vname(i.rs1), vname(i.rs2));
    case Op::VSEL: return fmt::format("vsel {}, {}, {}", vname(i.rd), x(i.rs1), vname(i.rs2));
    case Op::VSLI: return fmt::format("vsli {}, {}, {}", vname(i.rd), vname(i.rs1), i.shift());
    case Op::VSRI:
        return fmt::format("vsri{} {}, {}, {}", round_suffix_text(i.round_mode()), vname(i.rd), vname(i.rs1), i.shift());
    case Op::VRNG: return fmt::format("vrng {}", vname(i.rd));
    case Op::VANDADD: return fmt::format("vandadd {}, {}, {}, {}", vname(i.rd), vname(i.rs1), x(i.rs2), i.funct7);
    case Op::VLOAD_V: return fmt::format("vload.v {}, {}({})", vname(i.rd), i.imm, x(i.rs1));
    case Op::VLOAD_L: return fmt::format("vload.l {}, {}({})", vname(i.rd), i.imm, vname(i.rs1));
    case Op::VLOAD_R0:
    case Op::VLOAD_R1: return fmt::format("{} {}({})", m, i.imm, x(i.rs1));
    case Op::VEXTRACT: return fmt::format("vextract {}, {}, {}", x(i.rd), vname(i.rs1), i.imm);
    case Op::VFILL: return fmt::format("vfill {}, {}", vname(i.rd), x(i.rs1));
    case Op::VSTORE_V: return fmt::format("vstore.v {}, {}({})", vname(i.rs2), i.imm, x(i.rs1));
    case Op::VSTORE_L: return fmt::format("vstore.l {}, {}({})", vname(i.rs2), i.imm, vname(i.rs1));

    case Op::LUI:
    case Op::AUIPC: return fmt::format("{} {}, 0x{:x}", m, x(i.rd), i.imm);
    case Op::JAL: return fmt::format("jal {}, {}", x(i.rd), i.imm);
    case Op::JALR: return fmt::format("jalr {}, {}({})", x(i.rd), i.imm, x(i.rs1));
    case Op::BEQ:
    case Op::BNE:
    case Op::BLT:
    case Op::BGE:
    case Op::BLTU:
    case Op::BGEU: return fmt::format("{} {}, {}, {}", m, x(i.rs1), x(i.rs2), i.imm);
    case Op::LB:
    case Op::LH:
    case Op::LW:
    case Op::LBU:
    case Op::LHU: return fmt::format("{} {}, {}({})", m, x(i.rd), i.imm, x(i.rs1));
    case Op::SB:
    case Op::SH:
    case Op::SW: return fmt::format("{} {}, {}({})", m, x(i.rs2), i.imm, x(i.rs1));
    case Op::ADDI:
    case Op::SLTI:
    case Op::SLTIU:
    case Op::XORI:
    case Op::ORI:
    case Op::ANDI:
    case Op::SLLI:
    case Op::SRLI:
    case Op::SRAI: return fmt::format("{} {}, {}, {}", m, x(i.rd), x(i.rs1), i.imm);
    case Op::FENCE: return fmt::format("fence {}", i.imm);
    case Op::ECALL:
    case Op::EBREAK: return std::string(m);
    case Op::CLZ: return fmt::format("clz {}, {}", x(i.rd), x(i.rs1));
    case Op::CSRRW:
    case Op::CSRRS:
    case Op::CSRRC: return fmt::format("{} {}, 0x{:x}, {}", m, x(i.rd), i.imm, x(i.rs1));
    case Op::CSRRWI:
    case Op::CSRRSI:
    case Op::CSRRCI: return fmt::format("{} {}, 0x{:x}, {}", m, x(i.rd), i.imm, i.rs1);
    default: return fmt::format("{} {}, {}, {}", m, x(i.rd), x(i.rs1), x(i.rs2));
    }
}

std::string disassemble(std::uint32_t word) {
    try {
        return disassemble(decode(word));
    } catch (const IllegalInstruction&) {
        return fmt::format(".word 0x{:08x}", word);
    }
}

} // namespace fenn
