// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fenn/dsl.hpp"
#include "fenn/kernels.hpp"
#include "fenn/machine.hpp"
#include "fenn/rows.hpp"

namespace fenn::net {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AllocationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when generated code fails to compile, assemble or run. `where`
/// names the process that produced the failing code.
struct ElaborationError : std::runtime_error {
    ElaborationError(std::string where, const std::string& what);
    std::string where;
};

enum class PlaceHint : std::uint8_t { Auto, Vmem, Llm };

struct Variable {
    QFormat format = s7_8_sat;
    double init = 0;                    // broadcast to every neuron
    std::vector<std::int16_t> init_raw; // per-neuron raw values, overrides init
    PlaceHint place = PlaceHint::Auto;
};

/// Neurons of one population with their update kernel.
struct Population {
    std::string name;
    int shape = 0;
    std::string kernel; // DSL source
    std::map<std::string, dsl::Param> params;
    std::map<std::string, Variable> vars;
    std::string event = "Spike"; // emitter name inside the kernel
};

/// External spike source, fed one bitfield per step.
struct Input {
    std::string name;
    int shape = 0;
};

enum class WeightPlace : std::uint8_t { Auto, Vmem, External };

struct Connection {
    std::string name;
    std::string src, dst;
    std::string target = "I";
    kernels::Encoding encoding = kernels::Encoding::Dense;
    QFormat format = s7_8_sat; // must equal the target variable's format
    Matrix16 weights;          // raw values, n_src x n_dst
    Matrix16 delays;           // delayed only
    int n_delay = 1;
    WeightPlace place = WeightPlace::Auto;
    RowMatrix rows; // filled by encode() unless already set
};

struct Model {
    std::vector<Population> populations;
    std::vector<Input> inputs;
    std::vector<Connection> connections;

    const Population* population(const std::string& name) const;
    const Input* input(const std::string& name) const;
    /// Neuron count of a population or input; -1 when unknown.
    int source_shape(const std::string& name) const;
};

/// Builds the row matrices of every connection that has none yet.
void encode(Model& model);

/// Checks references, shapes, formats and encoding combinations.
void validate(const Model& model);

/// Where each variable, bitfield and weight matrix lives.
struct MemoryPlan {
    struct VarSlot {
        std::string pop, var;
        kernels::Placement place;
        int shape = 0;
    };
    struct ConnSlot {
        kernels::LayoutDescriptor layout;
    };
    std::vector<VarSlot> vars;
    std::map<std::string, std::uint32_t> bitfields; // population / input -> dmem byte address
    std::vector<ConnSlot> connections;              // in model order

    std::uint32_t dmem_used = 0;
    std::uint32_t vmem_used = 0;
    std::uint32_t llm_used = 0; // halfwords per lane
    std::uint64_t ext_used = 0;

    const VarSlot& var(const std::string& pop, const std::string& name) const;
};

/// Lane-local variables go where compressed or delayed propagation needs
/// them; weights spill to external memory, streamed through two row buffers,
/// once vector memory runs out.
MemoryPlan allocate(const Model& model, const MemConfig& cfg = {});

/// Per-step spike bitfields of one source.
struct SpikeTrain {
    int shape = 0;
    std::vector<std::vector<std::uint32_t>> steps;

    int words() const { return (shape + 31) / 32; }
    int timesteps() const { return static_cast<int>(steps.size()); }
    bool spiked(int t, int n) const;
    void set(int t, int n);
    std::uint64_t count() const;
};

SpikeTrain make_train(int shape, int T);

struct RunOptions {
    int steps = 1;
    std::vector<std::string> record; // "pop.var"
    std::uint64_t seed = 1;          // lane RNG seeds
    MemConfig mem{};
    DmaConfig dma{};
    std::uint64_t max_cycles = UINT64_MAX;
};

struct SimOutputs {
    std::map<std::string, SpikeTrain> spikes; // every population
    /// Raw values at the start of each step, neuron order.
    std::map<std::string, std::vector<std::vector<std::int16_t>>> records;
    PerfReport perf;
    std::uint64_t update_cycles = 0;
    std::uint64_t propagation_cycles = 0;
    std::uint64_t sops = 0; // synapses of spiking rows, padding excluded
    MemoryPlan plan;
    std::string program; // assembly
};

/// Compiles kernels, generates propagation, assembles, runs `steps` steps.
/// Each step updates every population, then propagates every connection.
/// The program yields to the host before each step so input spikes can be
/// written and state recorded.
SimOutputs elaborate_and_run(Model model, const std::map<std::string, SpikeTrain>& inputs, const RunOptions& opt);

/// Per-lane seeds derived from one number; identical in simulator and oracles.
LaneStates lane_seeds(std::uint64_t seed);

/// Format/param/var environment of a population's kernel.
dsl::Env kernel_env(const Population& p);

/// The leaky integrate-and-fire population used throughout:
/// V = Alpha * V + I (+ Bias), spike and subtract on crossing VThresh.
Population lif_population(const std::string& name, int shape, double tau_mem, double v_thresh,
                          QFormat v_format = s7_8_sat, double bias = 0.0);

} // namespace fenn::net
