// SPDX-License-Identifier: Apache-2.0
#include "fenn/kernels.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace fenn::kernels {

const char* encoding_name(Encoding e) {
    switch (e) {
    case Encoding::Dense: return "dense";
    case Encoding::Compressed: return "compressed";
    case Encoding::Delayed: return "delayed";
    }
    return "?";
}

Encoding parse_encoding(const std::string& name) {
    if (name == "dense") return Encoding::Dense;
    if (name == "compressed") return Encoding::Compressed;
    if (name == "delayed") return Encoding::Delayed;
    throw std::invalid_argument("unknown encoding " + name);
}

void LayoutDescriptor::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("layout: " + m); };
    if (n_post <= 0 || n_post % 32 != 0) fail("n_post must be a positive multiple of 32");
    if (n_pre <= 0) fail("n_pre must be positive");
    if (row_vectors <= 0) fail("empty rows");
    if (bitfield % 4 != 0) fail("bitfield must be word aligned");
    if (external) {
        if (buffer_a % 64 || buffer_b % 64) fail("row buffers must be 64-byte aligned");
        if (weights % 64) fail("external rows must be 64-byte aligned");
    } else if (weights % 64) {
        fail("weights must be 64-byte aligned");
    }
    switch (encoding) {
    case Encoding::Dense:
        if (target.kind == Placement::Kind::DelayLlm) fail("dense rows cannot target a delay buffer");
        if (target.kind == Placement::Kind::Vmem && target.base % 64) fail("I must be 64-byte aligned");
        if (row_vectors != n_post / 32) fail("dense row length must equal n_post / 32");
        break;
    case Encoding::Compressed:
        if (target.kind != Placement::Kind::Llm) fail("compressed rows need I in lane-local memory");
        if (index_bits < 0 || (1 << index_bits) < n_post / 32) fail("index bits too small for N_target");
        break;
    case Encoding::Delayed:
        if (target.kind != Placement::Kind::DelayLlm) fail("delayed rows need a delay buffer");
        if (delay_bits != target.delay_bits) fail("delay bits disagree with the delay buffer");
        if (row_vectors != n_post / 32) fail("delayed row length must equal n_post / 32");
        if ((n_post / 32) << delay_bits > 2048) fail("delay buffer too large for immediate offsets");
        break;
    }
}

namespace {

/// A scalar base register holding `base + bias`. Offsets are emitted relative
/// to it, bumping the register by kBump (held in s5) when they run past the
/// 12-bit immediate range.
struct Ptr {
    std::string reg;
    std::int64_t bias = 2048;

    std::string at(std::string& out, std::int64_t off) {
        while (off - bias > 2047) {
            out += fmt::format("  add {0}, {0}, s5\n", reg);
            bias += kBump;
        }
        if (off - bias < -2048) throw std::logic_error("pointer walked backwards");
        return fmt::format("{}({})", off - bias, reg);
    }
};

const char* vadd_op(bool sat) { return sat ? "vadd.s" : "vadd"; }

// Uncompressed: w in v1, I alternating v2/v3, one lookahead load of I.
std::string dense_body(const LayoutDescriptor& L) {
    std::string s;
    Ptr w{"s1"};
    const int R = L.row_vectors;
    const char* add = vadd_op(L.saturate);
    if (L.target.kind == Placement::Kind::Vmem) {
        Ptr i{"s2"};
        s += "  mv s2, s9\n";
        s += fmt::format("  vload.v v2, {}\n", i.at(s, 0));
        for (int k = 0; k < R; ++k) {
            const char* ik = k % 2 ? "v3" : "v2";
            const char* in = k % 2 ? "v2" : "v3";
            s += fmt::format("  vload.v v1, {}\n", w.at(s, 64 * k));
            if (k + 1 < R) s += fmt::format("  vload.v {}, {}\n", in, i.at(s, 64 * (k + 1)));
            s += fmt::format("  {} {}, {}, v1\n", add, ik, ik);
            s += fmt::format("  vstore.v {}, {}\n", ik, i.at(s, 64 * k));
        }
    } else {
        // I in lane-local memory, addressed through v7 = I base
        s += "  vload.l v2, 0(v7)\n";
        for (int k = 0; k < R; ++k) {
            const char* ik = k % 2 ? "v3" : "v2";
            const char* in = k % 2 ? "v2" : "v3";
            s += fmt::format("  vload.v v1, {}\n", w.at(s, 64 * k));
            if (k + 1 < R) s += fmt::format("  vload.l {}, {}(v7)\n", in, k + 1);
            s += fmt::format("  {} {}, {}, v1\n", add, ik, ik);
            s += fmt::format("  vstore.l {}, {}(v7)\n", ik, k);
        }
    }
    return s;
}

// Compressed and delayed share the shape: row words alternate v1/v2, the
// lane-local address goes to v3, I to v4 and the weight to v5.
std::string lane_local_body(const LayoutDescriptor& L) {
    std::string s;
    Ptr w{"s1"};
    const int R = L.row_vectors;
    const bool delayed = L.encoding == Encoding::Delayed;
    const int bits = delayed ? L.delay_bits : L.index_bits;
    const char* add = vadd_op(L.saturate);
    s += fmt::format("  vload.v v1, {}\n", w.at(s, 0));
    for (int k = 0; k < R; ++k) {
        const char* dk = k % 2 ? "v2" : "v1";
        const char* dn = k % 2 ? "v1" : "v2";
        if (k + 1 < R) s += fmt::format("  vload.v {}, {}\n", dn, w.at(s, 64 * (k + 1)));
        const int off = delayed ? k << bits : 0;
        if (delayed) {
            s += fmt::format("  vadd v3, {}, v6\n", dk);
            s += fmt::format("  vandadd v3, v3, s9, {}\n", bits);
        } else {
            s += fmt::format("  vandadd v3, {}, s9, {}\n", dk, bits);
        }
        s += fmt::format("  vload.l v4, {}(v3)\n", off);
        s += fmt::format("  vsri v5, {}, {}\n", dk, bits);
        s += fmt::format("  {} v4, v4, v5\n", add);
        s += fmt::format("  vstore.l v4, {}(v3)\n", off);
    }
    return s;
}

std::string row_handler(const std::string& name, const LayoutDescriptor& L) {
    L.validate();
    std::string s = fmt::format("{}_row:\n", name);
    s += "  mul s1, t3, s3\n  add s1, s1, s4\n";
    s += gen_row_body(L);
    s += "  jr x30\n";
    return s;
}

// Entry code common to every propagation routine.
std::string routine_setup(const LayoutDescriptor& L) {
    std::string s;
    s += fmt::format("  li s0, {}\n", L.bitfield + 2048);
    s += fmt::format("  li s3, {}\n", L.stride_bytes());
    const std::uint32_t ibase = L.target.kind == Placement::Kind::Vmem ? L.target.base + 2048 : L.target.base;
    s += fmt::format("  li s9, {}\n", ibase);
    if (L.target.kind == Placement::Kind::Llm && L.encoding == Encoding::Dense) s += "  vfill v7, s9\n";
    if (L.encoding == Encoding::Delayed) s += "  addi t2, s11, 1\n  vfill v6, t2\n";
    if (L.external) {
        s += fmt::format("  li s4, {}\n", L.weights);
        s += fmt::format("  li s6, {}\n", L.buffer_a + 2048);
        s += fmt::format("  li s7, {}\n", L.buffer_b + 2048);
        s += "  li s8, -1\n";
        s += "  csrw dma_bytes, s3\n";
    } else {
        s += fmt::format("  li s4, {}\n", L.weights + 2048);
    }
    return s;
}

std::string wait_dma(const std::string& label) {
    return fmt::format("{0}:\n  csrr t2, dma_status\n  bnez t2, {0}\n", label);
}

} // namespace

std::string prologue() { return fmt::format("  li s5, {}\n  li s11, 0\n", kBump); }

std::string gen_row_body(const LayoutDescriptor& L) {
    return L.encoding == Encoding::Dense ? dense_body(L) : lane_local_body(L);
}

std::string gen_propagate_dense(const std::string& name, const LayoutDescriptor& layout) {
    if (layout.encoding != Encoding::Dense) throw std::invalid_argument("not a dense layout");
    return row_handler(name, layout);
}

std::string gen_propagate_compressed(const std::string& name, const LayoutDescriptor& layout) {
    if (layout.encoding != Encoding::Compressed) throw std::invalid_argument("not a compressed layout");
    return row_handler(name, layout);
}

std::string gen_propagate_delayed(const std::string& name, const LayoutDescriptor& layout) {
    if (layout.encoding != Encoding::Delayed) throw std::invalid_argument("not a delayed layout");
    return row_handler(name, layout);
}

std::string gen_spike_scan(const std::string& name, const LayoutDescriptor& L) {
    L.validate();
    std::string s = fmt::format("{}:\n", name);
    s += routine_setup(L);

    // Words are loaded one ahead into t0 / a7 so a zero word costs two
    // cycles. Handlers sit after every group of 64 words to stay within
    // branch range.
    constexpr int kGroup = 64;
    const int W = L.bitfield_words();
    Ptr bf{"s0"};
    auto reg = [](int k) { return k % 2 ? "a7" : "t0"; };
    s += fmt::format("  lw t0, {}\n", bf.at(s, 0));
    for (int g = 0; g < W; g += kGroup) {
        const int end = std::min(W, g + kGroup);
        for (int k = g; k < end; ++k) {
            if (k + 1 < W) s += fmt::format("  lw {}, {}\n", reg(k + 1), bf.at(s, 4 * (k + 1)));
            s += fmt::format("  bnez {}, {}_h{}\n{}_n{}:\n", reg(k), name, k, name, k);
        }
        s += fmt::format("  j {}_g{}\n", name, end);
        for (int k = g; k < end; ++k) {
            s += fmt::format("{}_h{}:\n  mv a6, {}\n  li t3, {}\n  jal x29, {}_bits\n  j {}_n{}\n",
                             name, k, reg(k), 32 * k + 31, name, name, k);
        }
        s += fmt::format("{}_g{}:\n", name, end);
    }
    if (L.external) {
        s += fmt::format("  bltz s8, {}_done\n", name);
        s += wait_dma(name + "_wl");
        s += fmt::format("  mv s1, s6\n  jal x31, {}_body\n", name);
    }
    s += fmt::format("{}_done:\n  ret\n", name);

    // Set bits high to low: count leading zeros, shift them and the bit off.
    s += fmt::format("{}_bits:\n", name);
    s += "  clz t1, a6\n  sll a6, a6, t1\n  sub t3, t3, t1\n  slli a6, a6, 1\n";
    s += fmt::format("  jal x30, {}_row\n", name);
    s += fmt::format("  addi t3, t3, -1\n  bnez a6, {}_bits\n  jr x29\n", name);

    if (L.external) {
        // Fetch row t3 into the spare buffer while the previous row is processed.
        s += fmt::format("{}_row:\n", name);
        s += wait_dma(name + "_w");
        s += "  mul t2, t3, s3\n  add t2, t2, s4\n  csrw dma_ext_addr, t2\n";
        s += "  addi t2, s7, -2048\n  csrw dma_local_addr, t2\n  csrwi dma_ctrl, 1\n";
        s += fmt::format("  bltz s8, {}_swap\n", name);
        s += fmt::format("  mv s1, s6\n  jal x31, {}_body\n", name);
        s += fmt::format("{}_swap:\n  mv t2, s6\n  mv s6, s7\n  mv s7, t2\n  mv s8, t3\n  jr x30\n", name);
        s += fmt::format("{}_body:\n", name);
        s += gen_row_body(L);
        s += "  jr x31\n";
    } else {
        s += row_handler(name, L);
    }
    return s;
}

std::string gen_propagation(const std::string& name, const LayoutDescriptor& layout) {
    return gen_spike_scan(name, layout);
}

std::string gen_lif_update(const std::string& name, const LifParams& p, const UpdateLayout& L) {
    if (L.n <= 0) throw std::invalid_argument("empty population");
    if (L.v % 64) throw std::invalid_argument("V must be 64-byte aligned");
    const int vectors = (L.n + 31) / 32;
    std::string s = fmt::format("{}:\n", name);
    s += fmt::format("  li a0, {}\n", L.v);
    switch (L.i.kind) {
    case Placement::Kind::Vmem:
    case Placement::Kind::Llm: s += fmt::format("  li a1, {}\n", L.i.base); break;
    case Placement::Kind::DelayLlm:
        s += fmt::format("  andi a1, s11, {}\n  li t2, {}\n  add a1, a1, t2\n", (1 << L.i.delay_bits) - 1, L.i.base);
        break;
    }
    s += fmt::format("  li a2, {}\n  li a3, {}\n", L.spikes, vectors);
    s += fmt::format("  vlui v10, {}\n  vlui v11, {}\n  vlui v12, 0\n", static_cast<std::uint16_t>(p.alpha),
                     static_cast<std::uint16_t>(p.v_thresh));
    const bool vm = L.i.kind == Placement::Kind::Vmem;
    s += fmt::format("{}_loop:\n", name);
    s += "  vload.v v1, 0(a0)\n";
    s += vm ? "  vload.v v2, 0(a1)\n" : "  vfill v13, a1\n  vload.l v2, 0(v13)\n";
    s += "  vmul v3, v10, v1, 15\n  vadd.s v1, v3, v2\n";
    s += "  vtge a4, v1, v11\n  vsub.s v4, v1, v11\n  vsel v1, a4, v4\n";
    s += "  vstore.v v1, 0(a0)\n";
    s += vm ? "  vstore.v v12, 0(a1)\n" : "  vstore.l v12, 0(v13)\n";
    s += "  sw a4, 0(a2)\n  addi a0, a0, 64\n";
    const int step = vm ? 64 : (L.i.kind == Placement::Kind::Llm ? 1 : 1 << L.i.delay_bits);
    s += fmt::format("  addi a1, a1, {}\n  addi a2, a2, 4\n  addi a3, a3, -1\n  bnez a3, {}_loop\n", step, name);
    if (L.n % 32) {
        s += fmt::format("  lw a4, -4(a2)\n  li a5, {}\n  and a4, a4, a5\n  sw a4, -4(a2)\n",
                         static_cast<std::int32_t>((1u << (L.n % 32)) - 1u));
    }
    s += "  ret\n";
    return s;
}

int inner_loop_instructions(Encoding e) {
    switch (e) {
    case Encoding::Dense: return 4;
    case Encoding::Compressed: return 6;
    case Encoding::Delayed: return 7;
    }
    return 0;
}

double theoretical_gsops(Encoding e, double clock_hz) { return clock_hz * 32.0 / inner_loop_instructions(e) / 1e9; }

} // namespace fenn::kernels
