// SPDX-License-Identifier: Apache-2.0
#include "fenn/propagate.hpp"

#include <cstring>
#include <stdexcept>

#include <fmt/format.h>

#include "fenn/assembler.hpp"

namespace fenn::kernels {

namespace {

std::uint32_t align64(std::uint64_t x) { return static_cast<std::uint32_t>((x + 63) / 64 * 64); }

} // namespace

void load_rows(Machine& m, const LayoutDescriptor& L, const RowMatrix& rows) {
    const std::size_t bytes = rows.words.size() * 2;
    if (L.external) {
        if (L.weights + bytes > m.mem_config().ext_bytes) throw std::out_of_range("rows exceed external memory");
        std::memcpy(m.ext() + L.weights, rows.words.data(), bytes);
    } else {
        if (L.weights + bytes > m.state().vmem.size() * 2) throw std::out_of_range("rows exceed vector memory");
        std::memcpy(m.state().vmem.data() + L.weights / 2, rows.words.data(), bytes);
    }
}

std::vector<std::int16_t> read_target(const Machine& m, const LayoutDescriptor& L) {
    const int n = L.n_post;
    std::vector<std::int16_t> out;
    switch (L.target.kind) {
    case Placement::Kind::Vmem:
        out.assign(m.state().vmem.begin() + L.target.base / 2, m.state().vmem.begin() + L.target.base / 2 + n);
        break;
    case Placement::Kind::Llm:
        for (int j = 0; j < n; ++j) out.push_back(m.llm_at(j % 32, L.target.base + static_cast<std::uint32_t>(j / 32)));
        break;
    case Placement::Kind::DelayLlm: {
        const int nd = 1 << L.target.delay_bits;
        for (int j = 0; j < n; ++j)
            for (int d = 0; d < nd; ++d)
                out.push_back(m.llm_at(j % 32, L.target.base + static_cast<std::uint32_t>((j / 32) * nd + d)));
        break;
    }
    }
    return out;
}

void write_target(Machine& m, const LayoutDescriptor& L, const std::vector<std::int16_t>& v) {
    const int n = L.n_post;
    switch (L.target.kind) {
    case Placement::Kind::Vmem:
        for (int j = 0; j < n && j < static_cast<int>(v.size()); ++j) m.state().vmem[L.target.base / 2 + static_cast<std::size_t>(j)] = v[static_cast<std::size_t>(j)];
        break;
    case Placement::Kind::Llm:
        for (int j = 0; j < n && j < static_cast<int>(v.size()); ++j) m.llm_at(j % 32, L.target.base + static_cast<std::uint32_t>(j / 32)) = v[static_cast<std::size_t>(j)];
        break;
    case Placement::Kind::DelayLlm: {
        const int nd = 1 << L.target.delay_bits;
        for (std::size_t k = 0; k < v.size() && k < static_cast<std::size_t>(n * nd); ++k) {
            const int j = static_cast<int>(k) / nd, d = static_cast<int>(k) % nd;
            m.llm_at(j % 32, L.target.base + static_cast<std::uint32_t>((j / 32) * nd + d)) = v[k];
        }
        break;
    }
    }
}

LayoutDescriptor standalone_layout(const RowMatrix& rows, const PropagationOptions& opt) {
    LayoutDescriptor L;
    L.encoding = rows.encoding;
    L.n_pre = rows.n_pre;
    L.n_post = rows.n_post;
    L.row_vectors = rows.row_vectors;
    L.index_bits = rows.index_bits;
    L.delay_bits = rows.delay_bits;
    L.external = opt.external;
    L.saturate = opt.saturate;
    L.bitfield = 0;
    std::uint32_t next = 0;
    if (opt.external) {
        L.weights = 0;
        L.buffer_a = 0;
        L.buffer_b = align64(rows.stride_bytes());
        next = 2 * L.buffer_b;
    } else {
        L.weights = 0;
        next = align64(static_cast<std::uint64_t>(rows.words.size()) * 2);
    }
    switch (rows.encoding) {
    case Encoding::Dense: L.target = Placement::vmem(next); break;
    case Encoding::Compressed: L.target = Placement::llm(0); break;
    case Encoding::Delayed: L.target = Placement::delay(0, rows.delay_bits); break;
    }
    return L;
}

PropagationRun run_propagation(const RowMatrix& rows, const std::vector<std::uint32_t>& bitfield,
                               const std::vector<std::int16_t>& target_init, const PropagationOptions& opt) {
    const LayoutDescriptor L = standalone_layout(rows, opt);
    std::string src = ".text\n_start:\n" + prologue();
    src += fmt::format("  li s11, {}\n  csrwi perf_region, 1\n  jal ra, prop\n  csrwi perf_region, 0\n  ecall\n", opt.step);
    src += gen_propagation("prop", L);

    MemConfig mem = opt.mem;
    Machine m(mem, opt.dma);
    m.load(assemble(src));
    load_rows(m, L, rows);
    write_target(m, L, target_init);
    for (std::size_t k = 0; k < bitfield.size(); ++k) m.set_dmem_word(static_cast<std::uint32_t>(4 * k), bitfield[k]);

    PropagationRun r;
    r.info = m.run();
    if (r.info.status != ExitStatus::Exited) throw std::runtime_error("propagation did not finish");
    r.perf = m.counters();
    r.target = read_target(m, L);
    auto it = r.perf.region_cycles.find(1);
    r.propagation_cycles = it == r.perf.region_cycles.end() ? 0 : it->second;
    return r;
}

} // namespace fenn::kernels
