// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "fenn/kernels.hpp"
#include "fenn/machine.hpp"
#include "fenn/rows.hpp"

namespace fenn::kernels {

/// Writes rows to vector memory or external memory as the layout says.
void load_rows(Machine& m, const LayoutDescriptor& layout, const RowMatrix& rows);

/// Reads the accumulated variable back in neuron order. For a delay buffer
/// the result is neuron-major with n_delay slots per neuron.
std::vector<std::int16_t> read_target(const Machine& m, const LayoutDescriptor& layout);
void write_target(Machine& m, const LayoutDescriptor& layout, const std::vector<std::int16_t>& values);

struct PropagationRun {
    ExitInfo info;
    PerfReport perf;
    std::vector<std::int16_t> target;
    std::uint64_t propagation_cycles = 0; // region 1
};

struct PropagationOptions {
    bool external = false;
    bool saturate = true;
    std::uint32_t step = 0; // s11 during propagation
    DmaConfig dma{};
    MemConfig mem{};
};

/// One propagation through `rows` for the given source bitfield, standalone:
/// rows at vmem 0 (or external 0), I and buffers after them, bitfield at
/// dmem 0. The routine runs inside perf region 1.
PropagationRun run_propagation(const RowMatrix& rows, const std::vector<std::uint32_t>& bitfield,
                               const std::vector<std::int16_t>& target_init, const PropagationOptions& opt = {});

/// Layout used by run_propagation.
LayoutDescriptor standalone_layout(const RowMatrix& rows, const PropagationOptions& opt);

} // namespace fenn::kernels
