// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "fenn/image.hpp"
#include "fenn/machine.hpp"

namespace fenn::kernels {

enum class Encoding : std::uint8_t { Dense, Compressed, Delayed };

const char* encoding_name(Encoding e);
Encoding parse_encoding(const std::string& name);

/// Where a per-neuron variable lives. Neuron n of a lane-local variable sits
/// in lane n % 32 at halfword base + n / 32; a delay buffer spreads each
/// neuron over 2^delay_bits consecutive halfwords.
struct Placement {
    enum class Kind : std::uint8_t { Vmem, Llm, DelayLlm } kind = Kind::Vmem;
    std::uint32_t base = 0; // vmem byte address or lane-local halfword
    int delay_bits = 0;

    static Placement vmem(std::uint32_t base) { return {Kind::Vmem, base, 0}; }
    static Placement llm(std::uint32_t base) { return {Kind::Llm, base, 0}; }
    static Placement delay(std::uint32_t base, int bits) { return {Kind::DelayLlm, base, bits}; }
};

/// Everything a propagation routine needs to know about one connection.
struct LayoutDescriptor {
    Encoding encoding = Encoding::Dense;
    int n_pre = 0;
    int n_post = 0;      // multiple of 32
    int row_vectors = 0; // stride / 64
    int index_bits = 0;  // log2 N_target, compressed only
    int delay_bits = 0;  // log2 N_delay, delayed only

    bool external = false;       // rows streamed from external memory
    std::uint64_t weights = 0;   // vmem byte address, or external byte address
    std::uint32_t buffer_a = 0;  // vmem row buffers for streaming
    std::uint32_t buffer_b = 0;

    Placement target;            // the accumulated variable
    bool saturate = true;
    std::uint32_t bitfield = 0;  // dmem byte address of the source spikes

    std::uint32_t stride_bytes() const { return static_cast<std::uint32_t>(row_vectors) * 64u; }
    int bitfield_words() const { return (n_pre + 31) / 32; }
    void validate() const;
};

/// Register conventions shared by generated code:
///   s5 = pointer bump constant, s10 = number of steps, s11 = current step,
///   x29..x31 internal links, a0..a7 free for update routines.
inline constexpr int kBump = 4032;

/// Sets the constant registers every routine relies on.
std::string prologue();

/// Body for one row with the row address (biased by +2048) in s1. Emits the
/// fully unrolled inner loop of the chosen algorithm.
std::string gen_row_body(const LayoutDescriptor& layout);

/// Row handlers: compute the row address of neuron t3, run the body, `jr x30`.
std::string gen_propagate_dense(const std::string& name, const LayoutDescriptor& layout);
std::string gen_propagate_compressed(const std::string& name, const LayoutDescriptor& layout);
std::string gen_propagate_delayed(const std::string& name, const LayoutDescriptor& layout);

/// Callable routine (`jal ra, name`): walks the source bitfield high bit to
/// low bit per word and dispatches every spike to the row handler. With
/// external weights the next row is fetched while the previous one is
/// processed.
std::string gen_spike_scan(const std::string& name, const LayoutDescriptor& layout);

/// Scan plus row handler for one connection.
std::string gen_propagation(const std::string& name, const LayoutDescriptor& layout);

struct LifParams {
    std::int16_t alpha = 0; // s0_15
    std::int16_t v_thresh = 0x0100; // same format as V
};

struct UpdateLayout {
    int n = 0; // neurons; the tail of the last word is masked off
    std::uint32_t v = 0; // vmem byte address
    Placement i;
    std::uint32_t spikes = 0; // dmem byte address of the output bitfield
};

/// Hand-written LIF update, one loop iteration per 32 neurons.
std::string gen_lif_update(const std::string& name, const LifParams& params, const UpdateLayout& layout);

/// Steady-state instructions per 32 synapses of each algorithm.
int inner_loop_instructions(Encoding e);

/// f_max * 32 / N.
double theoretical_gsops(Encoding e, double clock_hz = 175e6);

} // namespace fenn::kernels
