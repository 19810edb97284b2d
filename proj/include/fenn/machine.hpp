// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fenn/image.hpp"
#include "fenn/isa.hpp"
#include "fenn/prng.hpp"

namespace fenn {

using Vec = std::array<std::int16_t, kLanes>;

struct MemConfig {
    std::uint32_t imem_bytes = 65536;
    std::uint32_t dmem_bytes = 131072;
    std::uint32_t vmem_bytes = 1572864;
    std::uint32_t llm_halfwords = 1024; // per lane
    std::uint64_t ext_bytes = std::uint64_t{1} << 28;
};

struct DmaConfig {
    int latency = 60;
    int cycles_per_vector = 2; // one 64-byte vector every two cycles
    bool diagnose_races = true;
    int queue_depth = 1;       // transfers allowed to wait behind the active one
};

/// Timing parameters of the pipeline, kept in one place.
struct CycleModel {
    int taken_branch = 2;
    int jump = 2;
    int scalar_load_use = 1;
    int vector_load_use = 1;
    int div = 34;
    int drain = 2; // decode -> execute -> writeback after the final issue
};

enum class RngMode : std::uint8_t { OnConsume, FreeRunning };

enum class TrapKind : std::uint8_t {
    IllegalInstruction,
    MisalignedAccess,
    OutOfRange,
    DmaRace,
    BadSeed,
    DmaBusy,
};

const char* trap_name(TrapKind k);

struct Trap : std::runtime_error {
    Trap(TrapKind kind, std::uint32_t pc, std::uint32_t word, const std::string& detail);
    TrapKind kind;
    std::uint32_t pc;
    std::uint32_t word;
};

/// Everything a program can observe. Shared by the pipelined machine and the
/// big-step reference interpreter so the two can be compared directly.
struct ArchState {
    std::uint32_t pc = 0;
    std::array<std::uint32_t, 32> x{};
    std::array<Vec, 32> v{};
    LaneStates rng{};
    std::vector<std::uint8_t> dmem;
    std::vector<std::int16_t> vmem;
    std::vector<std::int16_t> llm; // lane-major, llm_halfwords per lane
    std::uint32_t perf_region = 0;

    friend bool operator==(const ArchState&, const ArchState&) = default;
};

enum class ExitStatus : std::uint8_t { Exited, Yield, Timeout };

struct PerfReport {
    std::uint64_t cycles = 0;
    std::uint64_t retired = 0;
    std::map<std::uint32_t, std::uint64_t> region_cycles;
    std::uint64_t dma_transfers = 0;
    std::uint64_t dma_bytes = 0;
    std::uint64_t dma_wait_cycles = 0;
    std::uint64_t load_use_stalls = 0;
};

struct ExitInfo {
    ExitStatus status = ExitStatus::Exited;
    std::int32_t exit_code = 0;
    std::uint64_t cycles = 0;
    std::uint64_t retired = 0;
    std::map<std::uint32_t, std::uint64_t> region_cycles;
};

/// One core: scalar issue, 3-stage vector pipeline (decode, execute,
/// writeback) with ALU forwarding into decode, memories, RNG lanes, CSRs and
/// a single-channel DMA engine. ECALL halts (a0 = exit code); EBREAK yields
/// to the host, and run() can be called again to resume.
class Machine {
public:
    explicit Machine(MemConfig mem = {}, DmaConfig dma = {}, CycleModel cycles = {});

    /// Clears all state and loads the image (sections into their spaces, pc = entry).
    void load(const ProgramImage& image);
    /// Applies data sections on top of the current state (memory restore).
    void apply(const ProgramImage& image);
    /// Data memories as image sections (only the nonzero extent of each).
    ProgramImage dump() const;

    ExitInfo run(std::uint64_t max_cycles = UINT64_MAX);

    ArchState& state() { return s_; }
    const ArchState& state() const { return s_; }
    const MemConfig& mem_config() const { return mem_; }

    std::uint8_t* ext() { return ext_.get(); }
    const std::uint8_t* ext() const { return ext_.get(); }

    Vec vmem_vector(std::uint32_t byte_addr) const;
    std::int16_t llm_at(int lane, std::uint32_t halfword) const;
    std::int16_t& llm_at(int lane, std::uint32_t halfword);
    std::uint32_t dmem_word(std::uint32_t addr) const;
    void set_dmem_word(std::uint32_t addr, std::uint32_t value);

    PerfReport counters() const;
    bool halted() const { return halted_; }

    void set_trace(std::ostream* os) { trace_ = os; }
    void set_rng_mode(RngMode m) { rng_mode_ = m; }
    DmaConfig& dma_config() { return dma_; }

private:
    struct Decoded {
        Instr instr;
        RegUse use;
        std::uint32_t word = 0;
        bool legal = false;
    };

    struct ExecLatch {
        bool valid = false;
        const Decoded* d = nullptr;
        std::uint32_t pc = 0;
        Vec a{}, b{}, c{};
        std::uint32_t scalar = 0;
    };

    struct WriteLatch {
        bool valid = false;
        int reg = -1;
        bool from_load = false;
        Vec value{};
    };

    struct Transfer {
        bool to_external = false;
        std::uint64_t ext_addr = 0;
        std::uint32_t vmem_addr = 0;
        std::uint32_t bytes = 0;
        std::uint64_t issue = 0;
        std::uint64_t complete = 0;
    };

    void tick_begin();
    void execute_stage();
    bool issue();
    void execute_scalar(const Decoded& d);
    void execute_vector(ExecLatch& e);
    std::uint32_t csr_access(const Decoded& d, std::uint32_t operand, bool write);
    void start_dma(std::uint32_t ctrl);
    void complete_dma();
    void check_dma_race(std::uint32_t vmem_addr, std::uint32_t bytes, bool write, const ExecLatch& e) const;
    std::uint16_t rng_draw(int lane);
    std::uint32_t read_x(int r) const { return s_.x[static_cast<std::size_t>(r)]; }
    void write_x(int r, std::uint32_t v) {
        if (r != 0) s_.x[static_cast<std::size_t>(r)] = v;
    }
    [[noreturn]] void trap(TrapKind kind, std::uint32_t pc, std::uint32_t word, const std::string& detail) const;
    std::uint32_t vmem_check(std::uint32_t addr, const ExecLatch& e) const;
    std::uint32_t llm_check(std::int32_t addr, const ExecLatch& e) const;

    MemConfig mem_;
    DmaConfig dma_;
    CycleModel cyc_;
    RngMode rng_mode_ = RngMode::OnConsume;
    ArchState s_;
    std::unique_ptr<std::uint8_t, decltype(&std::free)> ext_;
    std::vector<Decoded> imem_;

    ExecLatch ex_;
    WriteLatch wb_;
    std::uint64_t cycle_ = 0;
    std::uint64_t retired_ = 0;
    std::uint64_t stall_until_ = 0; // no issue before this cycle
    std::array<std::uint64_t, 32> x_ready_{};
    bool halted_ = false;
    bool yielded_ = false;
    int drain_left_ = 0;
    std::map<std::uint32_t, std::uint64_t> region_cycles_;
    std::uint64_t* region_counter_ = nullptr;

    std::uint64_t dma_ext_addr_ = 0;
    std::uint32_t dma_local_addr_ = 0;
    std::uint32_t dma_bytes_ = 0;
    std::deque<Transfer> dma_q_;
    std::optional<std::uint64_t> dma_wait_start_;
    std::uint64_t dma_transfers_ = 0, dma_total_bytes_ = 0, dma_wait_ = 0, load_use_stalls_ = 0;

    std::ostream* trace_ = nullptr;
};

/// Naive big-step interpreter: every instruction completes before the next
/// starts. No timing and no DMA engine. Used as the differential oracle.
class ReferenceMachine {
public:
    explicit ReferenceMachine(MemConfig mem = {});
    void load(const ProgramImage& image);
    /// Runs until ECALL or `max_instructions`; returns instructions retired.
    std::uint64_t run(std::uint64_t max_instructions);
    ArchState& state() { return s_; }
    const ArchState& state() const { return s_; }

private:
    void step();
    MemConfig mem_;
    ArchState s_;
    std::vector<std::uint32_t> text_;
    bool halted_ = false;
};

/// Writes image sections into a state sized by `mem` (shared by both machines).
void load_sections(const ProgramImage& image, const MemConfig& mem, ArchState& s, std::uint8_t* ext);

} // namespace fenn
