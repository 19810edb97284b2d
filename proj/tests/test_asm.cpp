// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <sstream>

#include "fenn/assembler.hpp"
#include "fenn/csr.hpp"
#include "random_instr.hpp"

using namespace fenn;

namespace {
std::vector<std::uint32_t> words(std::string_view src) { return assemble(src).text(); }
} // namespace

TEST_CASE("single instructions") {
    CHECK(words("vadd v3, v1, v2") == std::vector<std::uint32_t>{0x00208182u});
    CHECK(words("vmul.rn v4, v2, v3, 8") == std::vector<std::uint32_t>{0x30314202u});
    CHECK(disassemble(0x00208182u) == "vadd v3, v1, v2");
    CHECK(disassemble(0x30314202u) == "vmul.rn v4, v2, v3, 8");
    CHECK(disassemble(0u) == ".word 0x00000000");
}

TEST_CASE("labels and branches") {
    const auto w = words(R"(
_start: beq a0, a1, done
        addi a0, a0, 1
        addi a0, a0, 1
done:   ecall
)");
    REQUIRE(w.size() == 4);
    CHECK(decode(w[0]).imm == 12);
    const auto back = words("top: nop\n nop\n bnez t0, top\n");
    CHECK(decode(back[2]).imm == -8);
    // numeric operand is a raw offset
    CHECK(decode(words("beq x1, x2, 16")[0]).imm == 16);
    // numeric local labels
    const auto loc = words("1: nop\n j 1f\n j 1b\n1: ecall\n");
    CHECK(decode(loc[1]).imm == 8);
    CHECK(decode(loc[2]).imm == -8);
}

TEST_CASE("errors carry line numbers") {
    try {
        assemble("nop\n\nvfrobnicate v1\n");
        FAIL("expected error");
    } catch (const AsmError& e) {
        CHECK(e.line == 3);
        CHECK(std::string(e.what()).find("unknown mnemonic") != std::string::npos);
    }
    CHECK_THROWS_AS(assemble("j nowhere\n"), AsmError);
    CHECK_THROWS_AS(assemble("x: nop\nx: nop\n"), AsmError);
    CHECK_THROWS_AS(assemble("addi a0, a0, 5000\n"), AsmError);
    try {
        std::string far = "beq x0, x0, end\n";
        for (int k = 0; k < 1100; ++k) far += "nop\n";
        far += "end: ecall\n";
        assemble(far);
        FAIL("expected range error");
    } catch (const AsmError& e) {
        CHECK(e.line == 1);
    }
}

TEST_CASE("li and la expansion") {
    const auto small = words("li a0, -7\n");
    REQUIRE(small.size() == 1);
    CHECK(decode(small[0]) == make_i(Op::ADDI, 10, 0, -7));
    const auto big = words("li a0, 0x12345FFF\n");
    REQUIRE(big.size() == 2);
    const auto hi = decode(big[0]), lo = decode(big[1]);
    CHECK(((static_cast<std::uint32_t>(hi.imm) << 12) + static_cast<std::uint32_t>(lo.imm)) == 0x12345FFFu);
    // forward reference always takes two words
    const auto fwd = assemble("li a0, buf\necall\n.data\n.space 8\nbuf: .word 1\n");
    CHECK(fwd.text().size() == 3);
    CHECK(fwd.symbol("buf") == 8);
}

TEST_CASE("data sections") {
    const auto img = assemble(R"(
.equ N, 4
.data 0x100
tbl:  .word 1, 2, N
.vdata
      .align 6
vec:  .half 1, 2, 3
.lldata
      .lane 3
slot: .half 0x55, 0x66
      .lane all
      .half 9
.text
      la a0, tbl
      ecall
)");
    CHECK(img.symbol("tbl") == 0x100);
    CHECK(img.symbol("slot") == 0);
    bool saw_lane3 = false, saw_all = false;
    for (const auto& s : img.sections) {
        if (s.space == Space::Dmem) {
            CHECK(s.base == 0x100);
            CHECK(s.bytes.size() == 12);
            CHECK(s.bytes[8] == 4);
        }
        if (s.space == Space::Llm && s.lane == 3) {
            saw_lane3 = true;
            CHECK(s.base == 0);
            CHECK(s.bytes.size() == 4);
        }
        if (s.space == Space::Llm && s.lane == kAllLanes) {
            saw_all = true;
            CHECK(s.base == 2); // halfword address
        }
    }
    CHECK(saw_lane3);
    CHECK(saw_all);
}

TEST_CASE("csr names") {
    const auto w = words("csrr t0, dma_status\ncsrwi perf_region, 1\ncsrr t1, mcycle\n");
    CHECK(decode(w[0]).imm == csr::kDmaStatus);
    CHECK(decode(w[1]) == make_i(Op::CSRRWI, 0, 1, csr::kPerfRegion));
    CHECK(decode(w[2]).imm == csr::kMcycle);
}

TEST_CASE("disassemble then assemble reproduces every word") {
    std::mt19937 rng(5);
    for (int o = 0; o < kOpCount; ++o) {
        for (int k = 0; k < 200; ++k) {
            const Instr i = testing::random_instr(static_cast<Op>(o), rng);
            const auto w = encode(i);
            const auto text = disassemble(w);
            std::vector<std::uint32_t> back;
            try {
                back = words(text);
            } catch (const std::exception& e) {
                FAIL_CHECK(text << ": " << e.what());
                continue;
            }
            REQUIRE_MESSAGE(back.size() == 1, text);
            CHECK_MESSAGE(back[0] == w, text);
        }
    }
}

TEST_CASE("image file roundtrip and determinism") {
    const char* src = ".data\nx: .word 7\n.text\n_start: lw a0, %lo(x)(zero)\necall\n";
    const auto a = assemble(src), b = assemble(src);
    std::stringstream sa, sb;
    write_image(sa, a);
    write_image(sb, b);
    CHECK(sa.str() == sb.str());
    const auto back = read_image(sa);
    CHECK(back.text() == a.text());
    CHECK(back.symbol("x") == 0);
    CHECK(back.entry == a.entry);
}
