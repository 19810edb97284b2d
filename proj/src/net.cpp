// SPDX-License-Identifier: Apache-2.0
#include "fenn/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "fenn/assembler.hpp"
#include "fenn/propagate.hpp"

namespace fenn::net {

using kernels::Encoding;
using kernels::Placement;

ElaborationError::ElaborationError(std::string w, const std::string& what)
    : std::runtime_error(w + ": " + what), where(std::move(w)) {}

const Population* Model::population(const std::string& name) const {
    for (const auto& p : populations)
        if (p.name == name) return &p;
    return nullptr;
}

const Input* Model::input(const std::string& name) const {
    for (const auto& i : inputs)
        if (i.name == name) return &i;
    return nullptr;
}

int Model::source_shape(const std::string& name) const {
    if (auto* p = population(name)) return p->shape;
    if (auto* i = input(name)) return i->shape;
    return -1;
}

void encode(Model& model) {
    for (auto& c : model.connections) {
        if (!c.rows.words.empty() || c.rows.n_pre > 0) continue;
        try {
            switch (c.encoding) {
            case Encoding::Dense: c.rows = build_dense_rows(c.weights); break;
            case Encoding::Compressed: c.rows = build_compressed_rows(c.weights); break;
            case Encoding::Delayed: {
                const Matrix16 d = c.delays.data.empty() ? Matrix16(c.weights.rows, c.weights.cols) : c.delays;
                c.rows = build_delayed_rows(c.weights, d, c.n_delay);
                break;
            }
            }
        } catch (const ConnectivityError& e) {
            throw ModelError(fmt::format("connection {}: {}", c.name, e.what()));
        }
    }
}

void validate(const Model& model) {
    std::set<std::string> names;
    auto unique = [&](const std::string& n) {
        if (n.empty()) throw ModelError("empty name");
        if (!names.insert(n).second) throw ModelError("duplicate name " + n);
    };
    for (const auto& p : model.populations) {
        unique(p.name);
        if (p.shape <= 0) throw ModelError("population " + p.name + " has no neurons");
        for (const auto& [vn, v] : p.vars)
            if (!v.init_raw.empty() && static_cast<int>(v.init_raw.size()) != p.shape)
                throw ModelError(fmt::format("{}.{}: {} initial values for {} neurons", p.name, vn, v.init_raw.size(), p.shape));
    }
    for (const auto& i : model.inputs) {
        unique(i.name);
        if (i.shape <= 0) throw ModelError("input " + i.name + " has no neurons");
    }
    std::map<std::pair<std::string, std::string>, int> delayed_into; // target -> n_delay, 0 for plain
    for (const auto& c : model.connections) {
        const std::string who = "connection " + c.name;
        const int n_src = model.source_shape(c.src);
        if (n_src < 0) throw ModelError(who + ": unknown source " + c.src);
        const Population* dst = model.population(c.dst);
        if (!dst) throw ModelError(who + ": unknown target population " + c.dst);
        auto var = dst->vars.find(c.target);
        if (var == dst->vars.end()) throw ModelError(fmt::format("{}: {} has no variable {}", who, c.dst, c.target));
        if (!(c.format == var->second.format))
            throw ModelError(fmt::format("{}: format {} differs from {}.{} ({})", who, format_name(c.format), c.dst, c.target,
                                         format_name(var->second.format)));
        if (c.rows.n_pre != n_src || c.rows.n_post != pad32(dst->shape))
            throw ModelError(fmt::format("{}: weights are {}x{}, expected {}x{}", who, c.rows.n_pre, c.rows.n_post, n_src, dst->shape));
        if (c.encoding != Encoding::Dense && var->second.place == PlaceHint::Vmem)
            throw ModelError(who + ": " + kernels::encoding_name(c.encoding) + " propagation needs a lane-local target");
        const int nd = c.encoding == Encoding::Delayed ? c.n_delay : 0;
        auto [it, fresh] = delayed_into.emplace(std::make_pair(c.dst, c.target), nd);
        if (!fresh && it->second != nd)
            throw ModelError(fmt::format("{}: {}.{} mixes delayed and undelayed inputs or delay depths", who, c.dst, c.target));
    }
}

const MemoryPlan::VarSlot& MemoryPlan::var(const std::string& pop, const std::string& name) const {
    for (const auto& v : vars)
        if (v.pop == pop && v.var == name) return v;
    throw ModelError("no variable " + pop + "." + name);
}

namespace {

std::uint64_t align64(std::uint64_t x) { return (x + 63) / 64 * 64; }

} // namespace

MemoryPlan allocate(const Model& model, const MemConfig& cfg) {
    validate(model);
    MemoryPlan plan;

    // what each target variable needs
    std::map<std::pair<std::string, std::string>, Placement> kind;
    for (const auto& c : model.connections) {
        auto& k = kind[{c.dst, c.target}];
        if (c.encoding == Encoding::Delayed) k = Placement::delay(0, ceil_log2(c.n_delay));
        else if (c.encoding == Encoding::Compressed) k = Placement::llm(0);
    }

    std::uint64_t vmem = 0, llm = 0, dmem = 0;
    for (const auto& p : model.populations) {
        const auto vectors = static_cast<std::uint64_t>((p.shape + 31) / 32);
        for (const auto& [name, v] : p.vars) {
            Placement pl = Placement::vmem(0);
            if (auto it = kind.find({p.name, name}); it != kind.end()) pl = it->second;
            if (pl.kind == Placement::Kind::Vmem && v.place == PlaceHint::Llm) pl = Placement::llm(0);
            if (pl.kind == Placement::Kind::Vmem) {
                pl.base = static_cast<std::uint32_t>(vmem);
                vmem = align64(vmem + vectors * 64);
            } else {
                pl.base = static_cast<std::uint32_t>(llm);
                llm += vectors << pl.delay_bits;
            }
            plan.vars.push_back({p.name, name, pl, p.shape});
        }
    }
    if (llm > cfg.llm_halfwords)
        throw AllocationError(fmt::format("lane-local memory exhausted: need {} halfwords per lane, have {}", llm, cfg.llm_halfwords));
    if (vmem > cfg.vmem_bytes) throw AllocationError(fmt::format("vector memory exhausted by variables: need {} bytes", vmem));

    auto bitfield = [&](const std::string& name, int shape) {
        plan.bitfields[name] = static_cast<std::uint32_t>(dmem);
        dmem += static_cast<std::uint64_t>((shape + 31) / 32) * 4;
    };
    for (const auto& p : model.populations) bitfield(p.name, p.shape);
    for (const auto& i : model.inputs) bitfield(i.name, i.shape);
    if (dmem > cfg.dmem_bytes) throw AllocationError(fmt::format("scalar memory exhausted by spike bitfields: need {} bytes", dmem));

    std::uint64_t ext = 0;
    for (const auto& c : model.connections) {
        const RowMatrix& r = c.rows;
        kernels::LayoutDescriptor L;
        L.encoding = c.encoding;
        L.n_pre = r.n_pre;
        L.n_post = r.n_post;
        L.row_vectors = r.row_vectors;
        L.index_bits = r.index_bits;
        L.delay_bits = r.delay_bits;
        L.target = plan.var(c.dst, c.target).place;
        L.saturate = c.format.saturating;
        L.bitfield = plan.bitfields.at(c.src);
        const std::uint64_t bytes = static_cast<std::uint64_t>(r.n_pre) * r.stride_bytes();
        const bool fits = vmem + bytes <= cfg.vmem_bytes;
        if (c.place == WeightPlace::Vmem && !fits)
            throw AllocationError(fmt::format("connection {}: {} bytes of weights do not fit in vector memory", c.name, bytes));
        if (c.place == WeightPlace::External || (c.place == WeightPlace::Auto && !fits)) {
            L.external = true;
            L.weights = ext;
            ext = align64(ext + bytes);
            if (ext > cfg.ext_bytes)
                throw AllocationError(fmt::format("connection {}: external memory exhausted ({} bytes needed)", c.name, ext));
            L.buffer_a = static_cast<std::uint32_t>(vmem);
            L.buffer_b = static_cast<std::uint32_t>(align64(vmem + r.stride_bytes()));
            vmem = align64(L.buffer_b + r.stride_bytes());
            if (vmem > cfg.vmem_bytes) throw AllocationError(fmt::format("connection {}: no room for row buffers", c.name));
        } else {
            L.weights = vmem;
            vmem = align64(vmem + bytes);
        }
        plan.connections.push_back({L});
    }
    plan.dmem_used = static_cast<std::uint32_t>(dmem);
    plan.vmem_used = static_cast<std::uint32_t>(vmem);
    plan.llm_used = static_cast<std::uint32_t>(llm);
    plan.ext_used = ext;
    return plan;
}

bool SpikeTrain::spiked(int t, int n) const {
    return (steps[static_cast<std::size_t>(t)][static_cast<std::size_t>(n / 32)] >> (n % 32)) & 1u;
}

void SpikeTrain::set(int t, int n) { steps[static_cast<std::size_t>(t)][static_cast<std::size_t>(n / 32)] |= 1u << (n % 32); }

std::uint64_t SpikeTrain::count() const {
    std::uint64_t c = 0;
    for (const auto& s : steps)
        for (auto w : s) c += static_cast<std::uint64_t>(std::popcount(w));
    return c;
}

SpikeTrain make_train(int shape, int T) {
    SpikeTrain s;
    s.shape = shape;
    s.steps.assign(static_cast<std::size_t>(T), std::vector<std::uint32_t>(static_cast<std::size_t>((shape + 31) / 32)));
    return s;
}

LaneStates lane_seeds(std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    LaneStates s;
    for (auto& st : s) {
        do {
            const auto x = gen();
            st.s0 = static_cast<std::uint16_t>(x);
            st.s1 = static_cast<std::uint16_t>(x >> 16);
        } while (!st.valid());
    }
    return s;
}

dsl::Env kernel_env(const Population& p) {
    dsl::Env env;
    env.params = p.params;
    for (const auto& [name, v] : p.vars) env.vars[name] = v.format;
    env.events.insert(p.event);
    return env;
}

Population lif_population(const std::string& name, int shape, double tau_mem, double v_thresh, QFormat v_format, double bias) {
    Population p;
    p.name = name;
    p.shape = shape;
    p.kernel = bias != 0.0 ? "V = (Alpha * V) + I + Bias;\n" : "V = (Alpha * V) + I;\n";
    p.kernel += "I = 0;\nif(V >= VThresh) {\n    Spike();\n    V -= VThresh;\n}\n";
    p.params["Alpha"] = {std::exp(-1.0 / tau_mem), s0_15_sat};
    p.params["VThresh"] = {v_thresh, v_format};
    if (bias != 0.0) p.params["Bias"] = {bias, v_format};
    p.vars["V"].format = v_format;
    p.vars["I"].format = v_format;
    return p;
}

// ---- elaboration --------------------------------------------------------

namespace {

std::string broadcast(const MemoryPlan::VarSlot& slot, std::int16_t raw, int label) {
    const int vectors = (slot.shape + 31) / 32;
    std::string s = fmt::format("  vlui v1, {}\n  li a1, {}\n", static_cast<std::uint16_t>(raw), vectors);
    if (slot.place.kind == Placement::Kind::Vmem) {
        s += fmt::format("  li a0, {}\ninit_{}:\n  vstore.v v1, 0(a0)\n  addi a0, a0, 64\n", slot.place.base, label);
    } else {
        s += fmt::format("  li a0, {}\ninit_{}:\n  vfill v2, a0\n  vstore.l v1, 0(v2)\n  addi a0, a0, {}\n", slot.place.base, label,
                         1 << slot.place.delay_bits);
    }
    return s + fmt::format("  addi a1, a1, -1\n  bnez a1, init_{}\n", label);
}

void write_var(Machine& m, const MemoryPlan::VarSlot& slot, const std::vector<std::int16_t>& raw) {
    for (int j = 0; j < slot.shape; ++j) {
        const auto v = raw[static_cast<std::size_t>(j)];
        switch (slot.place.kind) {
        case Placement::Kind::Vmem: m.state().vmem[slot.place.base / 2 + static_cast<std::size_t>(j)] = v; break;
        case Placement::Kind::Llm: m.llm_at(j % 32, slot.place.base + static_cast<std::uint32_t>(j / 32)) = v; break;
        case Placement::Kind::DelayLlm: break;
        }
    }
}

std::vector<std::int16_t> read_var(const Machine& m, const MemoryPlan::VarSlot& slot, int step) {
    std::vector<std::int16_t> out(static_cast<std::size_t>(slot.shape));
    const int nd = 1 << slot.place.delay_bits;
    for (int j = 0; j < slot.shape; ++j) {
        switch (slot.place.kind) {
        case Placement::Kind::Vmem: out[static_cast<std::size_t>(j)] = m.state().vmem[slot.place.base / 2 + static_cast<std::size_t>(j)]; break;
        case Placement::Kind::Llm: out[static_cast<std::size_t>(j)] = m.llm_at(j % 32, slot.place.base + static_cast<std::uint32_t>(j / 32)); break;
        case Placement::Kind::DelayLlm:
            out[static_cast<std::size_t>(j)] =
                m.llm_at(j % 32, slot.place.base + static_cast<std::uint32_t>((j / 32) * nd + step % nd));
            break;
        }
    }
    return out;
}

} // namespace

SimOutputs elaborate_and_run(Model model, const std::map<std::string, SpikeTrain>& inputs, const RunOptions& opt) {
    encode(model);
    SimOutputs out;
    out.plan = allocate(model, opt.mem);
    const MemoryPlan& plan = out.plan;
    const int T = opt.steps;

    std::string routines, init;
    int init_label = 0;
    for (std::size_t k = 0; k < model.populations.size(); ++k) {
        const Population& p = model.populations[k];
        dsl::CodegenLayout L;
        L.n = p.shape;
        for (const auto& [name, v] : p.vars) L.vars[name] = plan.var(p.name, name).place;
        L.events[p.event] = plan.bitfields.at(p.name);
        try {
            routines += dsl::compile(p.kernel, kernel_env(p), fmt::format("upd_{}", k), L);
        } catch (const std::exception& e) {
            throw ElaborationError("population " + p.name, e.what());
        }
        for (const auto& [name, v] : p.vars) {
            if (!v.init_raw.empty() || v.init == 0.0) continue;
            const auto& slot = plan.var(p.name, name);
            init += broadcast(slot, quantize(v.init, v.format).raw, init_label++);
        }
    }
    for (std::size_t k = 0; k < model.connections.size(); ++k) {
        try {
            routines += kernels::gen_propagation(fmt::format("prop_{}", k), plan.connections[k].layout);
        } catch (const std::exception& e) {
            throw ElaborationError("connection " + model.connections[k].name, e.what());
        }
    }

    std::string src = ".text\n_start:\n" + kernels::prologue() + init;
    src += fmt::format("  li s10, {}\n", T);
    if (T > 0) {
        src += "main_loop:\n  ebreak\n  csrwi perf_region, 2\n";
        for (std::size_t k = 0; k < model.populations.size(); ++k) src += fmt::format("  jal ra, upd_{}\n", k);
        src += "  csrwi perf_region, 1\n";
        for (std::size_t k = 0; k < model.connections.size(); ++k) src += fmt::format("  jal ra, prop_{}\n", k);
        src += "  csrwi perf_region, 0\n  addi s11, s11, 1\n  blt s11, s10, main_loop\n";
    }
    src += "  ebreak\n  ecall\n" + routines;
    out.program = src;

    Machine m(opt.mem, opt.dma);
    try {
        m.load(assemble(src));
    } catch (const std::exception& e) {
        throw ElaborationError("program", e.what());
    }
    m.state().rng = lane_seeds(opt.seed);
    for (std::size_t k = 0; k < model.connections.size(); ++k) kernels::load_rows(m, plan.connections[k].layout, model.connections[k].rows);
    for (const auto& p : model.populations)
        for (const auto& [name, v] : p.vars)
            if (!v.init_raw.empty()) write_var(m, plan.var(p.name, name), v.init_raw);

    for (const auto& p : model.populations) out.spikes[p.name] = make_train(p.shape, T);
    struct Rec {
        std::string key;
        const MemoryPlan::VarSlot* slot;
    };
    std::vector<Rec> recs;
    for (const auto& key : opt.record) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) throw ModelError("record key " + key + " is not pop.var");
        recs.push_back({key, &plan.var(key.substr(0, dot), key.substr(dot + 1))});
        out.records[key].reserve(static_cast<std::size_t>(T));
    }

    int k = 0;
    for (;;) {
        const std::uint64_t used = m.counters().cycles;
        if (used >= opt.max_cycles) throw ElaborationError("run", "cycle limit reached");
        const ExitInfo info = m.run(opt.max_cycles - used);
        if (info.status == ExitStatus::Exited) break;
        if (info.status == ExitStatus::Timeout) throw ElaborationError("run", "cycle limit reached");
        if (k > 0)
            for (const auto& p : model.populations) {
                const std::uint32_t base = plan.bitfields.at(p.name);
                auto& words = out.spikes[p.name].steps[static_cast<std::size_t>(k - 1)];
                for (std::size_t w = 0; w < words.size(); ++w) words[w] = m.dmem_word(base + static_cast<std::uint32_t>(4 * w));
            }
        if (k < T) {
            for (const auto& r : recs) out.records[r.key].push_back(read_var(m, *r.slot, k));
            for (const auto& i : model.inputs) {
                const std::uint32_t base = plan.bitfields.at(i.name);
                const auto it = inputs.find(i.name);
                const bool have = it != inputs.end() && k < it->second.timesteps();
                for (int w = 0; w < (i.shape + 31) / 32; ++w)
                    m.set_dmem_word(base + static_cast<std::uint32_t>(4 * w), have ? it->second.steps[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)] : 0u);
            }
        }
        ++k;
    }

    out.perf = m.counters();
    auto region = [&](std::uint32_t r) {
        auto it = out.perf.region_cycles.find(r);
        return it == out.perf.region_cycles.end() ? std::uint64_t{0} : it->second;
    };
    out.update_cycles = region(2);
    out.propagation_cycles = region(1);
    for (const auto& c : model.connections) {
        const SpikeTrain* src = nullptr;
        if (auto it = out.spikes.find(c.src); it != out.spikes.end()) src = &it->second;
        else if (auto in = inputs.find(c.src); in != inputs.end()) src = &in->second;
        if (!src) continue;
        for (int t = 0; t < std::min(T, src->timesteps()); ++t)
            for (int n = 0; n < src->shape; ++n)
                if (src->spiked(t, n)) out.sops += c.rows.row_connections[static_cast<std::size_t>(n)];
    }
    return out;
}

} // namespace fenn::net
