// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "fenn/assembler.hpp"
#include "fenn/dsl.hpp"
#include "fenn/machine.hpp"

using namespace fenn;
using namespace fenn::dsl;

namespace {

const char* kLif = R"(
V = (Alpha * V) + I;
I = 0;
if(V >= VThresh) {
    Spike();
    V -= VThresh;
}
)";

Env lif_env(double alpha, double vth) {
    Env e;
    e.params["Alpha"] = {alpha, s0_15_sat};
    e.params["VThresh"] = {vth, s7_8_sat};
    e.vars["V"] = s7_8_sat;
    e.vars["I"] = s7_8_sat;
    e.events.insert("Spike");
    return e;
}

std::string wrap(const std::string& routine, const std::string& name) {
    return ".text\n_start:\n" + kernels::prologue() + "  jal ra, " + name + "\n  ecall\n" + routine;
}

std::size_t count(const std::string& s, const std::string& what) {
    std::size_t n = 0;
    for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++n;
    return n;
}

struct Population {
    std::vector<std::int16_t> v, i;
    std::vector<std::uint32_t> spikes;
};

// Runs a routine over V in vmem at 0 and I at `i_place`; spikes at dmem 0.
Population run_on_machine(const std::string& src, int n, const Population& in, kernels::Placement i_place, std::uint32_t i_base_hw) {
    Machine m;
    m.load(assemble(src));
    for (std::size_t k = 0; k < in.v.size(); ++k) m.state().vmem[k] = in.v[k];
    for (std::size_t k = 0; k < in.i.size(); ++k) {
        if (i_place.kind == kernels::Placement::Kind::Vmem) m.state().vmem[i_base_hw + k] = in.i[k];
        else m.llm_at(static_cast<int>(k % 32), static_cast<int>(i_place.base + k / 32)) = in.i[k];
    }
    m.run();
    Population out;
    for (std::size_t k = 0; k < in.v.size(); ++k) out.v.push_back(m.state().vmem[k]);
    for (std::size_t k = 0; k < in.i.size(); ++k) {
        if (i_place.kind == kernels::Placement::Kind::Vmem) out.i.push_back(m.state().vmem[i_base_hw + k]);
        else out.i.push_back(m.llm_at(static_cast<int>(k % 32), static_cast<int>(i_place.base + k / 32)));
    }
    for (int w = 0; w < (n + 31) / 32; ++w) out.spikes.push_back(m.dmem_word(static_cast<std::uint32_t>(4 * w)));
    return out;
}

Population random_population(std::mt19937& rng, int n) {
    Population p;
    const auto padded = static_cast<std::size_t>((n + 31) / 32 * 32);
    std::uniform_int_distribution<int> v(-32768, 32767);
    for (std::size_t k = 0; k < padded; ++k) {
        p.v.push_back(static_cast<std::int16_t>(v(rng)));
        p.i.push_back(static_cast<std::int16_t>(v(rng) / 4));
    }
    return p;
}

} // namespace

TEST_CASE("LIF listing parses") {
    const Program p = parse(kLif);
    REQUIRE(p.stmts.size() == 3);
    CHECK(p.stmts[0].kind == Stmt::Kind::Assign);
    CHECK(p.stmts[0].value->kind == Expr::Kind::Add);
    CHECK(p.stmts[0].value->lhs->kind == Expr::Kind::Mul);
    CHECK(p.stmts[1].kind == Stmt::Kind::Assign);
    CHECK(p.stmts[2].kind == Stmt::Kind::If);
    CHECK(p.stmts[2].cmp == Cmp::Ge);
    REQUIRE(p.stmts[2].then_body.size() == 2);
    CHECK(p.stmts[2].then_body[0].kind == Stmt::Kind::Emit);
    CHECK(p.stmts[2].then_body[1].op == '-');
}

TEST_CASE("empty program compiles to a bare return") {
    CodegenLayout L;
    L.n = 64;
    const std::string s = compile("  // nothing\n", lif_env(0.9, 1.0), "upd", L);
    CHECK(s == "upd:\n  ret\n");
    CHECK_NOTHROW(assemble(wrap(s, "upd")));
}

TEST_CASE("syntax errors carry a position") {
    try {
        parse("V = ;");
        FAIL("expected a syntax error");
    } catch (const SyntaxError& e) {
        CHECK(e.line == 1);
        CHECK(e.col == 5);
    }
    CHECK_THROWS_AS(parse("if (V >= 1) { V = 0; "), SyntaxError);
    CHECK_THROWS_AS(parse("V = 1 $ 2;"), SyntaxError);
    CHECK_THROWS_AS(parse("#pragma round up\n"), SyntaxError);
    CHECK(parse("#pragma round stochastic\nV = V;").rounding == RoundMode::Stochastic);
}

TEST_CASE("unresolved identifiers are rejected") {
    try {
        typecheck(parse("V = W;"), lif_env(0.9, 1.0));
        FAIL("expected a type error");
    } catch (const TypeError& e) {
        CHECK(std::string(e.what()).find("unresolved identifier W") != std::string::npos);
    }
    CHECK_THROWS_AS(typecheck(parse("Out();"), lif_env(0.9, 1.0)), TypeError);
    CHECK_THROWS_AS(typecheck(parse("Alpha = 1;"), lif_env(0.9, 1.0)), TypeError);
}

TEST_CASE("multiply shifts and format conversions") {
    Env e = lif_env(0.9, 1.0);
    e.vars["U"] = s9_6_sat;
    CodegenLayout L;
    L.n = 32;
    L.vars["V"] = kernels::Placement::vmem(0);
    L.vars["I"] = kernels::Placement::vmem(64);
    L.vars["U"] = kernels::Placement::vmem(128);
    L.events["Spike"] = 0;

    const std::string mul = compile("V = Alpha * V;", e, "k", L);
    CHECK(count(mul, "vmul") == 1);
    CHECK(mul.find(", 15\n") != std::string::npos);

    const std::string conv = compile("U = V;", e, "k", L);
    CHECK(count(conv, "vsri") == 1);
    CHECK(conv.find("vsri v") != std::string::npos);
    CHECK(conv.find(", 2\n") != std::string::npos);

    const std::string up = compile("V = U;", e, "k", L);
    CHECK(count(up, "vsli") == 1);

    // 15 + 15 - 6 = 24 is out of range
    Env e2 = e;
    e2.params["B"] = {0.5, s0_15_sat};
    CHECK_THROWS_AS(typecheck(parse("U = Alpha * B;"), e2), TypeError);

    const auto tp = typecheck(parse("V = 1000;"), e);
    REQUIRE(tp.warnings.size() == 1);
    CHECK(tp.warnings[0].find("clamped") != std::string::npos);
}

TEST_CASE("register pressure is reported") {
    std::string expr = "V";
    for (int k = 0; k < 40; ++k) expr = "Alpha * V + (" + expr + ")";
    CodegenLayout L;
    L.n = 32;
    L.vars["V"] = kernels::Placement::vmem(0);
    try {
        compile("V = " + expr + ";", lif_env(0.5, 1.0), "k", L);
        FAIL("expected a compile error");
    } catch (const CompileError& e) {
        CHECK(std::string(e.what()).find("register pressure") != std::string::npos);
    }
    // a short chain fits
    CHECK_NOTHROW(compile("V = Alpha * V + (Alpha * V + (V));", lif_env(0.5, 1.0), "k", L));
}

TEST_CASE("compiled LIF matches the hand-written kernel") {
    const int n = 10000;
    const double alpha = 0.95123, vth = 1.0;
    std::mt19937 rng(11);
    const Population in = random_population(rng, n);
    const auto i_hw = static_cast<std::uint32_t>(in.v.size());

    for (auto place : {kernels::Placement::vmem(i_hw * 2), kernels::Placement::llm(16)}) {
        CodegenLayout L;
        L.n = n;
        L.vars["V"] = kernels::Placement::vmem(0);
        L.vars["I"] = place;
        L.events["Spike"] = 0;
        const std::string dsl = compile(kLif, lif_env(alpha, vth), "upd", L);

        kernels::LifParams params{quantize(alpha, s0_15_sat).raw, quantize(vth, s7_8_sat).raw};
        kernels::UpdateLayout HL{n, 0, place, 0};
        const std::string hand = kernels::gen_lif_update("upd", params, HL);

        const auto a = run_on_machine(wrap(dsl, "upd"), n, in, place, i_hw);
        const auto b = run_on_machine(wrap(hand, "upd"), n, in, place, i_hw);
        CHECK(a.v == b.v);
        CHECK(a.i == b.i);
        CHECK(a.spikes == b.spikes);
        std::uint32_t fired = 0;
        for (auto w : a.spikes) fired += static_cast<std::uint32_t>(__builtin_popcount(w));
        CHECK(fired > 100);
        CHECK((a.spikes.back() >> (n % 32)) == 0u);
    }
}

TEST_CASE("masked branches only touch active lanes") {
    Env e;
    e.vars["V"] = s7_8_sat;
    e.vars["R"] = s7_8_sat;
    e.params["Sentinel"] = {-99, s7_8_sat};
    e.events.insert("Hit");
    const char* code = R"(
if (V > 0) {
    if (V < 2) { R = 1; Hit(); } else { R = 2; }
} else {
    R = R - 1;
}
)";
    CodegenLayout L;
    L.n = 64;
    L.vars["V"] = kernels::Placement::vmem(0);
    L.vars["R"] = kernels::Placement::vmem(128);
    L.events["Hit"] = 0;
    const std::string src = compile(code, e, "k", L);

    Machine m;
    m.load(assemble(wrap(src, "k")));
    for (int k = 0; k < 64; ++k) {
        m.state().vmem[static_cast<std::size_t>(k)] = static_cast<std::int16_t>((k % 4 - 1) * 256); // -1, 0, 1, 2
        m.state().vmem[static_cast<std::size_t>(64 + k)] = quantize(-99, s7_8_sat).raw;
    }
    m.run();
    std::uint32_t hits = 0;
    for (int k = 0; k < 64; ++k) {
        const auto r = m.state().vmem[static_cast<std::size_t>(64 + k)];
        switch (k % 4) {
        case 0:
        case 1: CHECK(r == quantize(-100, s7_8_sat).raw); break;
        case 2: CHECK(r == 256); hits |= 1u << (k % 32); break;
        case 3: CHECK(r == 512); break;
        }
    }
    CHECK(m.dmem_word(0) == hits);
    CHECK(m.dmem_word(4) == hits);
}

TEST_CASE("interpreter agrees with generated code") {
    std::mt19937 rng(5);
    for (auto mode : {"zero", "nearest", "stochastic"}) {
        CAPTURE(mode);
        const std::string code = std::string("#pragma round ") + mode + "\n" + kLif + "\nif (V < -2) { V = V * Alpha + 0.5; } else { I = V; }\n";
        const int n = 200;
        const auto tp = typecheck(parse(code), lif_env(0.8, 0.5));
        CodegenLayout L;
        L.n = n;
        L.vars["V"] = kernels::Placement::vmem(0);
        L.vars["I"] = kernels::Placement::llm(3);
        L.events["Spike"] = 0;
        const std::string src = codegen(tp, "upd", L);

        const Population in = random_population(rng, n);
        LaneStates seeds;
        for (int l = 0; l < kLanes; ++l) seeds[static_cast<std::size_t>(l)] = RngState{static_cast<std::uint16_t>(l * 977 + 1), 5};
        const auto got = [&] {
            Machine mm;
            mm.load(assemble(wrap(src, "upd")));
            mm.state().rng = seeds;
            for (std::size_t k = 0; k < in.v.size(); ++k) {
                mm.state().vmem[k] = in.v[k];
                mm.llm_at(static_cast<int>(k % 32), static_cast<int>(3 + k / 32)) = in.i[k];
            }
            mm.run();
            Population out;
            for (std::size_t k = 0; k < in.v.size(); ++k) {
                out.v.push_back(mm.state().vmem[k]);
                out.i.push_back(mm.llm_at(static_cast<int>(k % 32), static_cast<int>(3 + k / 32)));
            }
            for (int w = 0; w < (n + 31) / 32; ++w) out.spikes.push_back(mm.dmem_word(static_cast<std::uint32_t>(4 * w)));
            return out;
        }();

        std::map<std::string, std::vector<std::int16_t>> vars{{"V", in.v}, {"I", in.i}};
        std::map<std::string, std::vector<std::uint32_t>> events;
        LaneStates st = seeds;
        interpret(tp, n, vars, events, &st);
        CHECK(vars["V"] == got.v);
        CHECK(vars["I"] == got.i);
        CHECK(events["Spike"] == got.spikes);
    }
}
