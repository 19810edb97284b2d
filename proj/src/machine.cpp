// SPDX-License-Identifier: Apache-2.0
#include "fenn/machine.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <ostream>

#include <fmt/format.h>

#include "fenn/assembler.hpp"
#include "fenn/csr.hpp"

namespace fenn {

const char* trap_name(TrapKind k) {
    switch (k) {
    case TrapKind::IllegalInstruction: return "illegal instruction";
    case TrapKind::MisalignedAccess: return "misaligned access";
    case TrapKind::OutOfRange: return "address out of range";
    case TrapKind::DmaRace: return "DMA race";
    case TrapKind::BadSeed: return "invalid RNG seed";
    case TrapKind::DmaBusy: return "DMA queue full";
    }
    return "trap";
}

Trap::Trap(TrapKind k, std::uint32_t p, std::uint32_t w, const std::string& detail)
    : std::runtime_error(fmt::format("{} at pc 0x{:x} (word 0x{:08x}): {}", trap_name(k), p, w, detail)),
      kind(k), pc(p), word(w) {}

void load_sections(const ProgramImage& image, const MemConfig& mem, ArchState& s, std::uint8_t* ext) {
    for (const auto& sec : image.sections) {
        const std::uint64_t end = std::uint64_t{sec.base} + sec.bytes.size();
        switch (sec.space) {
        case Space::Imem: break;
        case Space::Dmem:
            if (end > s.dmem.size()) throw std::out_of_range(fmt::format("dmem section [0x{:x}, 0x{:x}) exceeds memory", sec.base, end));
            std::memcpy(s.dmem.data() + sec.base, sec.bytes.data(), sec.bytes.size());
            break;
        case Space::Vmem:
            if (end > s.vmem.size() * 2) throw std::out_of_range(fmt::format("vmem section [0x{:x}, 0x{:x}) exceeds memory", sec.base, end));
            std::memcpy(reinterpret_cast<std::uint8_t*>(s.vmem.data()) + sec.base, sec.bytes.data(), sec.bytes.size());
            break;
        case Space::Llm: {
            const std::uint64_t hw_end = sec.base + (sec.bytes.size() + 1) / 2;
            if (hw_end > mem.llm_halfwords) throw std::out_of_range("lane-local section exceeds memory");
            for (int lane = 0; lane < kLanes; ++lane) {
                if (sec.lane != kAllLanes && sec.lane != lane) continue;
                auto* dst = reinterpret_cast<std::uint8_t*>(s.llm.data() + static_cast<std::size_t>(lane) * mem.llm_halfwords + sec.base);
                std::memcpy(dst, sec.bytes.data(), sec.bytes.size());
            }
            break;
        }
        case Space::Ext:
            if (end > mem.ext_bytes) throw std::out_of_range("external section exceeds memory");
            if (ext != nullptr) std::memcpy(ext + sec.base, sec.bytes.data(), sec.bytes.size());
            break;
        }
    }
}

namespace {

void reset_state(ArchState& s, const MemConfig& mem) {
    s = ArchState{};
    s.dmem.assign(mem.dmem_bytes, 0);
    s.vmem.assign(mem.vmem_bytes / 2, 0);
    s.llm.assign(static_cast<std::size_t>(mem.llm_halfwords) * kLanes, 0);
}

void append_trimmed(ProgramImage& img, Space space, int lane, const std::uint8_t* data, std::size_t n, bool halfword_base) {
    std::size_t first = 0, last = n;
    while (first < n && data[first] == 0) ++first;
    while (last > first && data[last - 1] == 0) --last;
    if (first == last) return;
    if (halfword_base) first &= ~std::size_t{1};
    Section s;
    s.space = space;
    s.lane = lane;
    s.base = static_cast<std::uint32_t>(halfword_base ? first / 2 : first);
    s.bytes.assign(data + first, data + last);
    img.sections.push_back(std::move(s));
}

std::uint32_t mulh_signed(std::int32_t a, std::int32_t b) {
    return static_cast<std::uint32_t>((std::int64_t{a} * b) >> 32);
}

std::uint32_t scalar_alu(Op op, std::uint32_t a, std::uint32_t b) {
    const auto sa = static_cast<std::int32_t>(a), sb = static_cast<std::int32_t>(b);
    switch (op) {
    case Op::ADD: case Op::ADDI: return a + b;
    case Op::SUB: return a - b;
    case Op::SLL: case Op::SLLI: return a << (b & 31);
    case Op::SLT: case Op::SLTI: return sa < sb ? 1 : 0;
    case Op::SLTU: case Op::SLTIU: return a < b ? 1 : 0;
    case Op::XOR: case Op::XORI: return a ^ b;
    case Op::SRL: case Op::SRLI: return a >> (b & 31);
    case Op::SRA: case Op::SRAI: return static_cast<std::uint32_t>(sa >> (b & 31));
    case Op::OR: case Op::ORI: return a | b;
    case Op::AND: case Op::ANDI: return a & b;
    case Op::MUL: return a * b;
    case Op::MULH: return mulh_signed(sa, sb);
    case Op::MULHSU: return static_cast<std::uint32_t>((std::int64_t{sa} * static_cast<std::int64_t>(b)) >> 32);
    case Op::MULHU: return static_cast<std::uint32_t>((std::uint64_t{a} * b) >> 32);
    case Op::DIV:
        if (b == 0) return 0xFFFFFFFFu;
        if (sa == INT32_MIN && sb == -1) return a;
        return static_cast<std::uint32_t>(sa / sb);
    case Op::DIVU: return b == 0 ? 0xFFFFFFFFu : a / b;
    case Op::REM:
        if (b == 0) return a;
        if (sa == INT32_MIN && sb == -1) return 0;
        return static_cast<std::uint32_t>(sa % sb);
    case Op::REMU: return b == 0 ? a : a % b;
    case Op::CLZ: return static_cast<std::uint32_t>(std::countl_zero(a));
    default: return 0;
    }
}

bool branch_taken(Op op, std::uint32_t a, std::uint32_t b) {
    const auto sa = static_cast<std::int32_t>(a), sb = static_cast<std::int32_t>(b);
    switch (op) {
    case Op::BEQ: return a == b;
    case Op::BNE: return a != b;
    case Op::BLT: return sa < sb;
    case Op::BGE: return sa >= sb;
    case Op::BLTU: return a < b;
    case Op::BGEU: return a >= b;
    default: return false;
    }
}

bool is_div(Op op) { return op == Op::DIV || op == Op::DIVU || op == Op::REM || op == Op::REMU; }

} // namespace

Machine::Machine(MemConfig mem, DmaConfig dma, CycleModel cycles)
    : mem_(mem), dma_(dma), cyc_(cycles), ext_(nullptr, &std::free) {
    load(ProgramImage{});
}

void Machine::load(const ProgramImage& image) {
    reset_state(s_, mem_);
    ext_.reset(static_cast<std::uint8_t*>(std::calloc(mem_.ext_bytes, 1)));
    if (!ext_) throw std::bad_alloc();
    const auto text = image.text();
    if (text.size() * 4 > mem_.imem_bytes) throw std::out_of_range("program does not fit in instruction memory");
    imem_.assign(text.size(), Decoded{});
    for (std::size_t k = 0; k < text.size(); ++k) {
        auto& d = imem_[k];
        d.word = text[k];
        try {
            d.instr = decode(text[k]);
            d.use = reg_use(d.instr);
            d.legal = true;
        } catch (const IllegalInstruction&) {
            d.legal = false;
        }
    }
    load_sections(image, mem_, s_, ext_.get());
    s_.pc = image.entry;
    ex_ = {};
    wb_ = {};
    cycle_ = retired_ = stall_until_ = 0;
    x_ready_.fill(0);
    halted_ = yielded_ = false;
    drain_left_ = 0;
    region_cycles_.clear();
    region_counter_ = &region_cycles_[0];
    dma_ext_addr_ = dma_local_addr_ = dma_bytes_ = 0;
    dma_q_.clear();
    dma_wait_start_.reset();
    dma_transfers_ = dma_total_bytes_ = dma_wait_ = load_use_stalls_ = 0;
}

void Machine::apply(const ProgramImage& image) { load_sections(image, mem_, s_, ext_.get()); }

ProgramImage Machine::dump() const {
    ProgramImage img;
    append_trimmed(img, Space::Dmem, kAllLanes, s_.dmem.data(), s_.dmem.size(), false);
    append_trimmed(img, Space::Vmem, kAllLanes, reinterpret_cast<const std::uint8_t*>(s_.vmem.data()), s_.vmem.size() * 2, false);
    for (int lane = 0; lane < kLanes; ++lane)
        append_trimmed(img, Space::Llm, lane,
                       reinterpret_cast<const std::uint8_t*>(s_.llm.data() + static_cast<std::size_t>(lane) * mem_.llm_halfwords),
                       std::size_t{mem_.llm_halfwords} * 2, true);
    return img;
}

Vec Machine::vmem_vector(std::uint32_t byte_addr) const {
    Vec v{};
    std::copy_n(s_.vmem.begin() + byte_addr / 2, kLanes, v.begin());
    return v;
}

std::int16_t Machine::llm_at(int lane, std::uint32_t hw) const { return s_.llm[static_cast<std::size_t>(lane) * mem_.llm_halfwords + hw]; }
std::int16_t& Machine::llm_at(int lane, std::uint32_t hw) { return s_.llm[static_cast<std::size_t>(lane) * mem_.llm_halfwords + hw]; }

std::uint32_t Machine::dmem_word(std::uint32_t addr) const {
    std::uint32_t w;
    std::memcpy(&w, s_.dmem.data() + addr, 4);
    return w;
}

void Machine::set_dmem_word(std::uint32_t addr, std::uint32_t value) { std::memcpy(s_.dmem.data() + addr, &value, 4); }

PerfReport Machine::counters() const {
    PerfReport r;
    r.cycles = cycle_;
    r.retired = retired_;
    for (const auto& [k, v] : region_cycles_)
        if (v != 0) r.region_cycles[k] = v;
    r.dma_transfers = dma_transfers_;
    r.dma_bytes = dma_total_bytes_;
    r.dma_wait_cycles = dma_wait_;
    r.load_use_stalls = load_use_stalls_;
    return r;
}

void Machine::trap(TrapKind kind, std::uint32_t pc, std::uint32_t word, const std::string& detail) const {
    throw Trap(kind, pc, word, detail);
}

ExitInfo Machine::run(std::uint64_t max_cycles) {
    const std::uint64_t start = cycle_;
    yielded_ = false;
    ExitInfo info;
    while (true) {
        if ((halted_ || yielded_) && drain_left_ == 0) {
            info.status = halted_ ? ExitStatus::Exited : ExitStatus::Yield;
            break;
        }
        if (cycle_ - start >= max_cycles) {
            info.status = ExitStatus::Timeout;
            break;
        }
        if (!dma_q_.empty() && dma_q_.front().complete <= cycle_) complete_dma();
        if (wb_.valid) {
            s_.v[static_cast<std::size_t>(wb_.reg)] = wb_.value;
            wb_.valid = false;
        }
        if (ex_.valid) execute_stage();
        if (halted_ || yielded_) --drain_left_;
        else issue();
        if (rng_mode_ == RngMode::FreeRunning)
            for (auto& st : s_.rng) st = rng_next(st).next;
        ++*region_counter_;
        ++cycle_;
    }
    info.exit_code = static_cast<std::int32_t>(s_.x[10]);
    info.cycles = cycle_;
    info.retired = retired_;
    info.region_cycles = counters().region_cycles;
    return info;
}

bool Machine::issue() {
    if (cycle_ < stall_until_) return false;
    const std::uint32_t pc = s_.pc;
    if ((pc & 3) != 0 || pc / 4 >= imem_.size()) trap(TrapKind::OutOfRange, pc, 0, "instruction fetch outside program");
    const Decoded& d = imem_[pc / 4];
    if (!d.legal) trap(TrapKind::IllegalInstruction, pc, d.word, "undefined encoding");

    for (std::uint32_t m = d.use.xreads; m != 0; m &= m - 1)
        if (x_ready_[static_cast<std::size_t>(std::countr_zero(m))] > cycle_) return false;

    if (is_vector(d.instr.op)) {
        if (wb_.valid && wb_.from_load && (d.use.vreads >> wb_.reg & 1u)) {
            ++load_use_stalls_;
            return false;
        }
        auto read_v = [&](int r) -> const Vec& { return (wb_.valid && wb_.reg == r) ? wb_.value : s_.v[static_cast<std::size_t>(r)]; };
        const Instr& i = d.instr;
        ex_.valid = true;
        ex_.d = &d;
        ex_.pc = pc;
        if (d.use.vreads >> i.rs1 & 1u) ex_.a = read_v(i.rs1);
        if (d.use.vreads >> i.rs2 & 1u) ex_.b = read_v(i.rs2);
        if (i.op == Op::VSEL) ex_.c = read_v(i.rd);
        ex_.scalar = read_x(i.op == Op::VANDADD ? i.rs2 : i.rs1);
        s_.pc = pc + 4;
    } else {
        execute_scalar(d);
    }
    if (trace_ != nullptr) *trace_ << cycle_ << ' ' << fmt::format("{:08x}", pc) << ' ' << disassemble(d.instr) << '\n';
    ++retired_;
    return true;
}

void Machine::execute_scalar(const Decoded& d) {
    const Instr& i = d.instr;
    const std::uint32_t pc = s_.pc;
    const std::uint32_t a = read_x(i.rs1), b = read_x(i.rs2);
    const auto imm = static_cast<std::uint32_t>(i.imm);
    std::uint32_t next = pc + 4;
    auto mem_addr = [&](std::uint32_t addr, std::uint32_t size) {
        if (addr % size != 0) trap(TrapKind::MisalignedAccess, pc, d.word, fmt::format("scalar access at 0x{:x}", addr));
        if (std::uint64_t{addr} + size > s_.dmem.size()) trap(TrapKind::OutOfRange, pc, d.word, fmt::format("scalar access at 0x{:x}", addr));
        return s_.dmem.data() + addr;
    };
    switch (i.op) {
    case Op::LUI: write_x(i.rd, imm << 12); break;
    case Op::AUIPC: write_x(i.rd, pc + (imm << 12)); break;
    case Op::JAL:
        write_x(i.rd, pc + 4);
        next = pc + imm;
        stall_until_ = cycle_ + 1 + static_cast<std::uint64_t>(cyc_.jump);
        break;
    case Op::JALR:
        write_x(i.rd, pc + 4);
        next = (a + imm) & ~1u;
        stall_until_ = cycle_ + 1 + static_cast<std::uint64_t>(cyc_.jump);
        break;
    case Op::BEQ: case Op::BNE: case Op::BLT: case Op::BGE: case Op::BLTU: case Op::BGEU:
        if (branch_taken(i.op, a, b)) {
            next = pc + imm;
            stall_until_ = cycle_ + 1 + static_cast<std::uint64_t>(cyc_.taken_branch);
        }
        break;
    case Op::LB: case Op::LH: case Op::LW: case Op::LBU: case Op::LHU: {
        const std::uint32_t addr = a + imm;
        std::uint32_t v = 0;
        switch (i.op) {
        case Op::LB: v = static_cast<std::uint32_t>(static_cast<std::int8_t>(*mem_addr(addr, 1))); break;
        case Op::LBU: v = *mem_addr(addr, 1); break;
        case Op::LH: { std::int16_t h; std::memcpy(&h, mem_addr(addr, 2), 2); v = static_cast<std::uint32_t>(std::int32_t{h}); break; }
        case Op::LHU: { std::uint16_t h; std::memcpy(&h, mem_addr(addr, 2), 2); v = h; break; }
        default: std::memcpy(&v, mem_addr(addr, 4), 4); break;
        }
        write_x(i.rd, v);
        if (i.rd != 0) x_ready_[i.rd] = cycle_ + 1 + static_cast<std::uint64_t>(cyc_.scalar_load_use);
        break;
    }
    case Op::SB: *mem_addr(a + imm, 1) = static_cast<std::uint8_t>(b); break;
    case Op::SH: { const auto h = static_cast<std::uint16_t>(b); std::memcpy(mem_addr(a + imm, 2), &h, 2); break; }
    case Op::SW: std::memcpy(mem_addr(a + imm, 4), &b, 4); break;
    case Op::ADDI: case Op::SLTI: case Op::SLTIU: case Op::XORI: case Op::ORI: case Op::ANDI:
    case Op::SLLI: case Op::SRLI: case Op::SRAI:
        write_x(i.rd, scalar_alu(i.op, a, imm));
        break;
    case Op::FENCE: break;
    case Op::ECALL:
        halted_ = true;
        drain_left_ = cyc_.drain;
        break;
    case Op::EBREAK:
        yielded_ = true;
        drain_left_ = cyc_.drain;
        break;
    case Op::CSRRW: case Op::CSRRS: case Op::CSRRC:
        write_x(i.rd, csr_access(d, a, i.op == Op::CSRRW || i.rs1 != 0));
        break;
    case Op::CSRRWI: case Op::CSRRSI: case Op::CSRRCI:
        write_x(i.rd, csr_access(d, i.rs1, i.op == Op::CSRRWI || i.rs1 != 0));
        break;
    default:
        write_x(i.rd, scalar_alu(i.op, a, b));
        if (is_div(i.op)) stall_until_ = cycle_ + 1 + static_cast<std::uint64_t>(cyc_.div);
        break;
    }
    s_.pc = next;
}

std::uint32_t Machine::csr_access(const Decoded& d, std::uint32_t operand, bool write) {
    const Instr& i = d.instr;
    const auto num = static_cast<std::uint16_t>(i.imm);
    std::uint32_t old = 0;
    switch (num) {
    case csr::kDmaExtAddr: old = static_cast<std::uint32_t>(dma_ext_addr_); break;
    case csr::kDmaLocalAddr: old = dma_local_addr_; break;
    case csr::kDmaBytes: old = dma_bytes_; break;
    case csr::kDmaCtrl: old = 0; break;
    case csr::kDmaStatus:
        old = dma_q_.empty() ? 0 : 1;
        if (old != 0 && !dma_wait_start_) dma_wait_start_ = cycle_;
        break;
    case csr::kPerfRegion: old = s_.perf_region; break;
    case csr::kMcycle: old = static_cast<std::uint32_t>(cycle_); break;
    case csr::kMcycleH: old = static_cast<std::uint32_t>(cycle_ >> 32); break;
    case csr::kMinstret: old = static_cast<std::uint32_t>(retired_); break;
    case csr::kMinstretH: old = static_cast<std::uint32_t>(retired_ >> 32); break;
    default: trap(TrapKind::IllegalInstruction, s_.pc, d.word, fmt::format("unknown CSR 0x{:x}", num));
    }
    if (!write) return old;
    std::uint32_t v = operand;
    if (i.op == Op::CSRRS || i.op == Op::CSRRSI) v = old | operand;
    if (i.op == Op::CSRRC || i.op == Op::CSRRCI) v = old & ~operand;
    switch (num) {
    case csr::kDmaExtAddr: dma_ext_addr_ = v; break;
    case csr::kDmaLocalAddr: dma_local_addr_ = v; break;
    case csr::kDmaBytes: dma_bytes_ = v; break;
    case csr::kDmaCtrl:
        if (v & csr::kDmaStart) {
            if (dma_q_.size() > static_cast<std::size_t>(dma_.queue_depth))
                trap(TrapKind::DmaBusy, s_.pc, d.word, "transfer started while the queue is full");
            start_dma(v);
        }
        break;
    case csr::kPerfRegion:
        s_.perf_region = v;
        region_counter_ = &region_cycles_[v];
        break;
    default: break; // read-only
    }
    return old;
}

void Machine::start_dma(std::uint32_t ctrl) {
    Transfer t;
    t.to_external = (ctrl & csr::kDmaToExternal) != 0;
    t.ext_addr = dma_ext_addr_;
    t.vmem_addr = dma_local_addr_;
    t.bytes = dma_bytes_;
    t.issue = cycle_;
    if (t.vmem_addr % 64 != 0) trap(TrapKind::MisalignedAccess, s_.pc, 0, fmt::format("DMA vector address 0x{:x}", t.vmem_addr));
    if (std::uint64_t{t.vmem_addr} + t.bytes > mem_.vmem_bytes || t.ext_addr + t.bytes > mem_.ext_bytes)
        trap(TrapKind::OutOfRange, s_.pc, 0, "DMA transfer outside memory");
    const std::uint64_t begin = dma_q_.empty() ? cycle_ : std::max<std::uint64_t>(cycle_, dma_q_.back().complete);
    t.complete = begin + static_cast<std::uint64_t>(dma_.latency) +
                 static_cast<std::uint64_t>(dma_.cycles_per_vector) * ((t.bytes + 63) / 64);
    dma_q_.push_back(t);
    ++dma_transfers_;
    dma_total_bytes_ += t.bytes;
}

void Machine::complete_dma() {
    while (!dma_q_.empty() && dma_q_.front().complete <= cycle_) {
        const Transfer t = dma_q_.front();
        dma_q_.pop_front();
        auto* vm = reinterpret_cast<std::uint8_t*>(s_.vmem.data()) + t.vmem_addr;
        if (t.to_external) std::memcpy(ext_.get() + t.ext_addr, vm, t.bytes);
        else std::memcpy(vm, ext_.get() + t.ext_addr, t.bytes);
        if (dma_q_.empty() && dma_wait_start_) {
            dma_wait_ += t.complete - *dma_wait_start_;
            dma_wait_start_.reset();
        }
    }
}

void Machine::check_dma_race(std::uint32_t addr, std::uint32_t bytes, bool write, const ExecLatch& e) const {
    if (!dma_.diagnose_races) return;
    for (const auto& t : dma_q_) {
        if (t.to_external && !write) continue; // reading a source buffer is harmless
        if (addr < t.vmem_addr + t.bytes && t.vmem_addr < addr + bytes)
            trap(TrapKind::DmaRace, e.pc, e.d->word,
                 fmt::format("vector access 0x{:x} overlaps in-flight transfer [0x{:x}, 0x{:x})", addr, t.vmem_addr, t.vmem_addr + t.bytes));
    }
}

std::uint16_t Machine::rng_draw(int lane) {
    auto& st = s_.rng[static_cast<std::size_t>(lane)];
    const auto r = rng_next(st);
    if (rng_mode_ == RngMode::OnConsume) st = r.next;
    return vrng_value(r.value);
}

std::uint32_t Machine::vmem_check(std::uint32_t addr, const ExecLatch& e) const {
    if (addr % 64 != 0) trap(TrapKind::MisalignedAccess, e.pc, e.d->word, fmt::format("vector address 0x{:x}", addr));
    if (std::uint64_t{addr} + 64 > mem_.vmem_bytes) trap(TrapKind::OutOfRange, e.pc, e.d->word, fmt::format("vector address 0x{:x}", addr));
    return addr / 2;
}

std::uint32_t Machine::llm_check(std::int32_t addr, const ExecLatch& e) const {
    if (addr < 0 || static_cast<std::uint32_t>(addr) >= mem_.llm_halfwords)
        trap(TrapKind::OutOfRange, e.pc, e.d->word, fmt::format("lane-local address {}", addr));
    return static_cast<std::uint32_t>(addr);
}

void Machine::execute_stage() {
    ex_.valid = false;
    execute_vector(ex_);
}

void Machine::execute_vector(ExecLatch& e) {
    const Instr& i = e.d->instr;
    Vec r{};
    bool writes = e.d->use.vwrite >= 0;
    bool load = false;
    switch (i.op) {
    case Op::VLUI: r.fill(static_cast<std::int16_t>(i.imm)); break;
    case Op::VADD:
        for (int l = 0; l < kLanes; ++l) r[l] = sat_add(Fx16(e.a[l]), Fx16(e.b[l]), i.saturating()).raw;
        break;
    case Op::VSUB:
        for (int l = 0; l < kLanes; ++l) r[l] = sat_sub(Fx16(e.a[l]), Fx16(e.b[l]), i.saturating()).raw;
        break;
    case Op::VAND:
        for (int l = 0; l < kLanes; ++l) r[l] = static_cast<std::int16_t>(e.a[l] & e.b[l]);
        break;
    case Op::VSL:
        for (int l = 0; l < kLanes; ++l) r[l] = wrap16(std::int64_t{e.a[l]} << (e.b[l] & 15));
        break;
    case Op::VSR:
        for (int l = 0; l < kLanes; ++l) r[l] = static_cast<std::int16_t>(e.a[l] >> (e.b[l] & 15));
        break;
    case Op::VMUL: {
        const bool stoch = i.round_mode() == RoundMode::Stochastic;
        for (int l = 0; l < kLanes; ++l)
            r[l] = mul_shift(Fx16(e.a[l]), Fx16(e.b[l]), i.shift(), i.round_mode(), stoch ? rng_draw(l) : 0).raw;
        break;
    }
    case Op::VTEQ: case Op::VTNE: case Op::VTLT: case Op::VTGE: {
        std::uint32_t mask = 0;
        for (int l = 0; l < kLanes; ++l) {
            bool c = false;
            switch (i.op) {
            case Op::VTEQ: c = e.a[l] == e.b[l]; break;
            case Op::VTNE: c = e.a[l] != e.b[l]; break;
            case Op::VTLT: c = e.a[l] < e.b[l]; break;
            default: c = e.a[l] >= e.b[l]; break;
            }
            mask |= std::uint32_t{c} << l;
        }
        write_x(i.rd, mask);
        break;
    }
    case Op::VSEL:
        for (int l = 0; l < kLanes; ++l) r[l] = (e.scalar >> l & 1u) ? e.b[l] : e.c[l];
        break;
    case Op::VSLI:
        for (int l = 0; l < kLanes; ++l) r[l] = wrap16(std::int64_t{e.a[l]} << i.shift());
        break;
    case Op::VSRI: {
        const bool stoch = i.round_mode() == RoundMode::Stochastic;
        for (int l = 0; l < kLanes; ++l)
            r[l] = shift_right_round(Fx16(e.a[l]), i.shift(), i.round_mode(), stoch ? rng_draw(l) : 0).raw;
        break;
    }
    case Op::VRNG:
        for (int l = 0; l < kLanes; ++l) r[l] = static_cast<std::int16_t>(rng_draw(l));
        break;
    case Op::VANDADD: {
        const std::int32_t mask = (1 << i.funct7) - 1;
        for (int l = 0; l < kLanes; ++l) r[l] = wrap16((e.a[l] & mask) + static_cast<std::int64_t>(static_cast<std::int32_t>(e.scalar)));
        break;
    }
    case Op::VLOAD_V: {
        const std::uint32_t addr = e.scalar + static_cast<std::uint32_t>(i.imm);
        const std::uint32_t hw = vmem_check(addr, e);
        check_dma_race(addr, 64, false, e);
        std::copy_n(s_.vmem.begin() + hw, kLanes, r.begin());
        load = true;
        break;
    }
    case Op::VLOAD_L:
        for (int l = 0; l < kLanes; ++l) {
            const auto hw = llm_check(static_cast<std::uint16_t>(e.a[l]) + i.imm, e);
            r[l] = s_.llm[static_cast<std::size_t>(l) * mem_.llm_halfwords + hw];
        }
        load = true;
        break;
    case Op::VLOAD_R0: case Op::VLOAD_R1: {
        const std::uint32_t addr = e.scalar + static_cast<std::uint32_t>(i.imm);
        const std::uint32_t hw = vmem_check(addr, e);
        check_dma_race(addr, 64, false, e);
        std::array<std::uint16_t, kLanes> vals;
        for (int l = 0; l < kLanes; ++l) vals[l] = static_cast<std::uint16_t>(s_.vmem[hw + l]);
        const auto bad = seed_lanes(vals, i.op == Op::VLOAD_R0 ? SeedHalf::Seed0 : SeedHalf::Seed1, s_.rng);
        if (bad != 0) trap(TrapKind::BadSeed, e.pc, e.d->word, fmt::format("all-zero RNG state in lanes 0x{:08x}", bad));
        break;
    }
    case Op::VEXTRACT:
        write_x(i.rd, static_cast<std::uint32_t>(std::int32_t{e.a[static_cast<std::size_t>(i.imm)]}));
        break;
    case Op::VFILL: r.fill(static_cast<std::int16_t>(e.scalar)); break;
    case Op::VSTORE_V: {
        const std::uint32_t addr = e.scalar + static_cast<std::uint32_t>(i.imm);
        const std::uint32_t hw = vmem_check(addr, e);
        check_dma_race(addr, 64, true, e);
        std::copy_n(e.b.begin(), kLanes, s_.vmem.begin() + hw);
        break;
    }
    case Op::VSTORE_L:
        for (int l = 0; l < kLanes; ++l) {
            const auto hw = llm_check(static_cast<std::uint16_t>(e.a[l]) + i.imm, e);
            s_.llm[static_cast<std::size_t>(l) * mem_.llm_halfwords + hw] = e.b[l];
        }
        break;
    default: writes = false; break;
    }
    if (writes) {
        wb_.valid = true;
        wb_.reg = i.rd;
        wb_.from_load = load;
        wb_.value = r;
    }
}

// ---------------------------------------------------------------------------
// Reference interpreter

ReferenceMachine::ReferenceMachine(MemConfig mem) : mem_(mem) { load(ProgramImage{}); }

void ReferenceMachine::load(const ProgramImage& image) {
    reset_state(s_, mem_);
    text_ = image.text();
    load_sections(image, mem_, s_, nullptr);
    s_.pc = image.entry;
    halted_ = false;
}

std::uint64_t ReferenceMachine::run(std::uint64_t max_instructions) {
    std::uint64_t n = 0;
    while (!halted_ && n < max_instructions) {
        step();
        ++n;
    }
    return n;
}

void ReferenceMachine::step() {
    auto& s = s_;
    const std::uint32_t pc = s.pc;
    if (pc % 4 != 0 || pc / 4 >= text_.size()) throw Trap(TrapKind::OutOfRange, pc, 0, "fetch");
    const std::uint32_t word = text_[pc / 4];
    Instr i;
    try {
        i = decode(word);
    } catch (const IllegalInstruction&) {
        throw Trap(TrapKind::IllegalInstruction, pc, word, "undefined encoding");
    }
    auto X = [&](int r) { return s.x[static_cast<std::size_t>(r)]; };
    auto setx = [&](int r, std::uint32_t v) {
        if (r != 0) s.x[static_cast<std::size_t>(r)] = v;
    };
    auto& V = s.v;
    auto rand15 = [&](int lane) {
        const auto st = rng_next(s.rng[static_cast<std::size_t>(lane)]);
        s.rng[static_cast<std::size_t>(lane)] = st.next;
        return static_cast<std::uint16_t>(st.value >> 1);
    };
    auto llm = [&](int lane, std::int64_t a) -> std::int16_t& {
        if (a < 0 || a >= mem_.llm_halfwords) throw Trap(TrapKind::OutOfRange, pc, word, "lane-local");
        return s.llm[static_cast<std::size_t>(lane) * mem_.llm_halfwords + static_cast<std::size_t>(a)];
    };
    auto vaddr = [&](std::uint32_t a) {
        if (a % 64 != 0) throw Trap(TrapKind::MisalignedAccess, pc, word, "vector");
        if (std::uint64_t{a} + 64 > mem_.vmem_bytes) throw Trap(TrapKind::OutOfRange, pc, word, "vector");
        return a / 2;
    };
    auto dm = [&](std::uint32_t a, std::uint32_t n) {
        if (a % n != 0) throw Trap(TrapKind::MisalignedAccess, pc, word, "scalar");
        if (std::uint64_t{a} + n > s.dmem.size()) throw Trap(TrapKind::OutOfRange, pc, word, "scalar");
        return s.dmem.data() + a;
    };
    const auto imm = static_cast<std::uint32_t>(i.imm);
    std::uint32_t next = pc + 4;
    Vec r{};
    switch (i.op) {
    case Op::VLUI: r.fill(static_cast<std::int16_t>(i.imm)); V[i.rd] = r; break;
    case Op::VADD:
    case Op::VSUB:
        for (int l = 0; l < kLanes; ++l) {
            const int wide = i.op == Op::VADD ? V[i.rs1][l] + V[i.rs2][l] : V[i.rs1][l] - V[i.rs2][l];
            r[l] = i.saturating() ? static_cast<std::int16_t>(std::clamp(wide, -32768, 32767)) : static_cast<std::int16_t>(wide);
        }
        V[i.rd] = r;
        break;
    case Op::VAND: for (int l = 0; l < kLanes; ++l) r[l] = static_cast<std::int16_t>(V[i.rs1][l] & V[i.rs2][l]); V[i.rd] = r; break;
    case Op::VSL: for (int l = 0; l < kLanes; ++l) r[l] = static_cast<std::int16_t>(static_cast<std::uint16_t>(V[i.rs1][l]) << (V[i.rs2][l] & 15)); V[i.rd] = r; break;
    case Op::VSR: for (int l = 0; l < kLanes; ++l) r[l] = static_cast<std::int16_t>(V[i.rs1][l] >> (V[i.rs2][l] & 15)); V[i.rd] = r; break;
    case Op::VMUL:
        for (int l = 0; l < kLanes; ++l) {
            const int sh = i.funct7 & 15;
            const int mode = (i.funct7 >> 4) & 3;
            std::int64_t p = std::int64_t{V[i.rs1][l]} * V[i.rs2][l];
            if (mode == 1 && sh > 0) p += std::int64_t{1} << (sh - 1);
            if (mode == 2) p += rand15(l) % (1 << sh);
            r[l] = static_cast<std::int16_t>(p >> sh);
        }
        V[i.rd] = r;
        break;
    case Op::VTEQ: case Op::VTNE: case Op::VTLT: case Op::VTGE: {
        std::uint32_t m = 0;
        for (int l = 0; l < kLanes; ++l) {
            const auto a = V[i.rs1][l], b = V[i.rs2][l];
            const bool c = i.op == Op::VTEQ ? a == b : i.op == Op::VTNE ? a != b : i.op == Op::VTLT ? a < b : a >= b;
            if (c) m |= 1u << l;
        }
        setx(i.rd, m);
        break;
    }
    case Op::VSEL:
        for (int l = 0; l < kLanes; ++l)
            if ((X(i.rs1) >> l) & 1u) V[i.rd][l] = V[i.rs2][l];
        break;
    case Op::VSLI: for (int l = 0; l < kLanes; ++l) r[l] = static_cast<std::int16_t>(static_cast<std::uint16_t>(V[i.rs1][l]) << (i.imm & 15)); V[i.rd] = r; break;
    case Op::VSRI:
        for (int l = 0; l < kLanes; ++l) {
            const int sh = i.imm & 15;
            const int mode = (i.imm >> 4) & 3;
            std::int32_t x = V[i.rs1][l];
            if (mode == 1 && sh > 0) x += 1 << (sh - 1);
            if (mode == 2) x += rand15(l) % (1 << sh);
            r[l] = static_cast<std::int16_t>(x >> sh);
        }
        V[i.rd] = r;
        break;
    case Op::VRNG: for (int l = 0; l < kLanes; ++l) r[l] = static_cast<std::int16_t>(rand15(l)); V[i.rd] = r; break;
    case Op::VANDADD:
        for (int l = 0; l < kLanes; ++l) r[l] = static_cast<std::int16_t>((V[i.rs1][l] & ((1 << i.funct7) - 1)) + X(i.rs2));
        V[i.rd] = r;
        break;
    case Op::VLOAD_V: { const auto h = vaddr(X(i.rs1) + imm); for (int l = 0; l < kLanes; ++l) r[l] = s.vmem[h + l]; V[i.rd] = r; break; }
    case Op::VLOAD_L: for (int l = 0; l < kLanes; ++l) r[l] = llm(l, static_cast<std::uint16_t>(V[i.rs1][l]) + i.imm); V[i.rd] = r; break;
    case Op::VLOAD_R0:
    case Op::VLOAD_R1: {
        const auto h = vaddr(X(i.rs1) + imm);
        for (int l = 0; l < kLanes; ++l) {
            auto& st = s.rng[static_cast<std::size_t>(l)];
            (i.op == Op::VLOAD_R0 ? st.s0 : st.s1) = static_cast<std::uint16_t>(s.vmem[h + l]);
            if (st.s0 == 0 && st.s1 == 0) throw Trap(TrapKind::BadSeed, pc, word, "seed");
        }
        break;
    }
    case Op::VEXTRACT: setx(i.rd, static_cast<std::uint32_t>(static_cast<std::int32_t>(V[i.rs1][i.imm]))); break;
    case Op::VFILL: r.fill(static_cast<std::int16_t>(X(i.rs1) & 0xFFFF)); V[i.rd] = r; break;
    case Op::VSTORE_V: { const auto h = vaddr(X(i.rs1) + imm); for (int l = 0; l < kLanes; ++l) s.vmem[h + l] = V[i.rs2][l]; break; }
    case Op::VSTORE_L: for (int l = 0; l < kLanes; ++l) llm(l, static_cast<std::uint16_t>(V[i.rs1][l]) + i.imm) = V[i.rs2][l]; break;

    case Op::LUI: setx(i.rd, imm << 12); break;
    case Op::AUIPC: setx(i.rd, pc + (imm << 12)); break;
    case Op::JAL: setx(i.rd, pc + 4); next = pc + imm; break;
    case Op::JALR: { const auto t = (X(i.rs1) + imm) & ~1u; setx(i.rd, pc + 4); next = t; break; }
    case Op::BEQ: case Op::BNE: case Op::BLT: case Op::BGE: case Op::BLTU: case Op::BGEU:
        if (branch_taken(i.op, X(i.rs1), X(i.rs2))) next = pc + imm;
        break;
    case Op::LB: setx(i.rd, static_cast<std::uint32_t>(static_cast<std::int8_t>(*dm(X(i.rs1) + imm, 1)))); break;
    case Op::LBU: setx(i.rd, *dm(X(i.rs1) + imm, 1)); break;
    case Op::LH: { const auto* p = dm(X(i.rs1) + imm, 2); setx(i.rd, static_cast<std::uint32_t>(static_cast<std::int16_t>(p[0] | (p[1] << 8)))); break; }
    case Op::LHU: { const auto* p = dm(X(i.rs1) + imm, 2); setx(i.rd, static_cast<std::uint32_t>(p[0] | (p[1] << 8))); break; }
    case Op::LW: { const auto* p = dm(X(i.rs1) + imm, 4); setx(i.rd, p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t{p[3]} << 24)); break; }
    case Op::SB: *dm(X(i.rs1) + imm, 1) = static_cast<std::uint8_t>(X(i.rs2)); break;
    case Op::SH: { auto* p = dm(X(i.rs1) + imm, 2); p[0] = static_cast<std::uint8_t>(X(i.rs2)); p[1] = static_cast<std::uint8_t>(X(i.rs2) >> 8); break; }
    case Op::SW: { auto* p = dm(X(i.rs1) + imm, 4); for (int k = 0; k < 4; ++k) p[k] = static_cast<std::uint8_t>(X(i.rs2) >> (8 * k)); break; }
    case Op::FENCE: case Op::EBREAK: break;
    case Op::ECALL: halted_ = true; break;
    case Op::CSRRW: case Op::CSRRS: case Op::CSRRC: case Op::CSRRWI: case Op::CSRRSI: case Op::CSRRCI: {
        if (i.imm != csr::kPerfRegion) throw Trap(TrapKind::IllegalInstruction, pc, word, "CSR not modelled by the reference");
        const bool immediate = i.op == Op::CSRRWI || i.op == Op::CSRRSI || i.op == Op::CSRRCI;
        const std::uint32_t src = immediate ? i.rs1 : X(i.rs1);
        const std::uint32_t old = s.perf_region;
        if (i.op == Op::CSRRW || i.op == Op::CSRRWI) s.perf_region = src;
        else if (i.op == Op::CSRRS || i.op == Op::CSRRSI) s.perf_region = old | src;
        else s.perf_region = old & ~src;
        setx(i.rd, old);
        break;
    }
    default:
        if (i.op >= Op::ADDI && i.op <= Op::SRAI) setx(i.rd, scalar_alu(i.op, X(i.rs1), imm));
        else setx(i.rd, scalar_alu(i.op, X(i.rs1), X(i.rs2)));
        break;
    }
    s.pc = next;
}

} // namespace fenn
