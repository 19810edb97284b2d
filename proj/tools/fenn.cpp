// SPDX-License-Identifier: Apache-2.0
// fenn: assembler, simulator, network runner and benchmarks.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "fenn/assembler.hpp"
#include "fenn/bench.hpp"
#include "fenn/machine.hpp"
#include "fenn/netfile.hpp"
#include "fenn/oracle.hpp"

using namespace fenn;

namespace {

constexpr int kOk = 0, kMismatch = 1, kUsage = 2, kTrap = 3;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ProgramImage image_from(const std::string& path) {
    if (ends_with(path, ".s") || ends_with(path, ".asm")) return assemble(slurp(path));
    return load_image(path);
}

// ---- asm / dis / run ----------------------------------------------------

int cmd_asm(const std::string& in, const std::string& out) {
    save_image(out, assemble(slurp(in)));
    return kOk;
}

int cmd_dis(const std::string& in) {
    const ProgramImage img = image_from(in);
    std::map<std::uint32_t, std::string> labels;
    for (const auto& [name, sym] : img.symbols)
        if (sym.space == Space::Imem) labels[sym.value] = name;
    const auto text = img.text();
    for (std::size_t k = 0; k < text.size(); ++k) {
        const auto addr = static_cast<std::uint32_t>(4 * k);
        if (auto it = labels.find(addr); it != labels.end()) fmt::print("{}:\n", it->second);
        fmt::print("  {:08x}:  {:08x}  {}\n", addr, text[k], disassemble(text[k]));
    }
    return kOk;
}

int cmd_run(const std::string& in, std::uint64_t max_cycles, bool trace, const std::string& dump) {
    Machine m;
    m.load(image_from(in));
    if (trace) m.set_trace(&std::cout);
    ExitInfo info = m.run(max_cycles);
    while (info.status == ExitStatus::Yield) info = m.run(max_cycles - std::min(max_cycles, m.counters().cycles));
    const PerfReport p = m.counters();
    fmt::print("status {}  exit {}  cycles {}  retired {}\n",
               info.status == ExitStatus::Exited ? "exited" : "timeout", info.exit_code, p.cycles, p.retired);
    for (const auto& [r, c] : p.region_cycles) fmt::print("region {}: {} cycles\n", r, c);
    for (int r = 0; r < 32; r += 4)
        fmt::print("{:>4} {:08x}  {:>4} {:08x}  {:>4} {:08x}  {:>4} {:08x}\n", xreg_name(r), m.state().x[r], xreg_name(r + 1),
                   m.state().x[r + 1], xreg_name(r + 2), m.state().x[r + 2], xreg_name(r + 3), m.state().x[r + 3]);
    if (!dump.empty()) save_image(dump, m.dump());
    return info.status == ExitStatus::Exited ? kOk : kTrap;
}

// ---- networks -----------------------------------------------------------

struct NetArgs {
    std::string model;
    int steps = 0;
    std::vector<std::string> record;
    std::uint64_t seed = 1;
    std::string out;
    std::string record_csv;
    bool json = false;
};

std::map<std::string, net::SpikeTrain> load_inputs(const io::NetworkFile& nf, int steps) {
    std::map<std::string, net::SpikeTrain> in;
    for (const auto& [name, path] : nf.input_files) in[name] = io::read_spikes(path, nf.model.source_shape(name), steps);
    return in;
}

net::RunOptions run_options(const io::NetworkFile& nf, NetArgs& a) {
    if (a.steps <= 0) a.steps = nf.steps;
    if (a.steps <= 0) throw CLI::ValidationError("--steps", "no step count given and none in the model");
    net::RunOptions opt;
    opt.steps = a.steps;
    opt.seed = a.seed;
    opt.record = a.record.empty() ? nf.record : a.record;
    return opt;
}

void write_outputs(const NetArgs& a, const std::map<std::string, net::SpikeTrain>& spikes,
                   const std::map<std::string, std::vector<std::vector<std::int16_t>>>& records) {
    if (!a.out.empty()) {
        for (const auto& [name, train] : spikes) {
            const std::string path = spikes.size() == 1 ? a.out : a.out + "." + name;
            if (ends_with(path, ".fspk")) {
                io::write_fspk(path, train);
            } else {
                std::ofstream f(path);
                io::write_events(f, train);
            }
        }
    }
    if (!a.record_csv.empty()) {
        std::ofstream f(a.record_csv);
        f << "var,t,neuron,raw\n";
        for (const auto& [key, rows] : records)
            for (std::size_t t = 0; t < rows.size(); ++t)
                for (std::size_t j = 0; j < rows[t].size(); ++j) f << key << ',' << t << ',' << j << ',' << rows[t][j] << '\n';
    }
}

int cmd_net_run(NetArgs a) {
    const io::NetworkFile nf = io::load_network(a.model);
    const net::RunOptions opt = run_options(nf, a);
    const auto out = net::elaborate_and_run(nf.model, load_inputs(nf, opt.steps), opt);
    if (a.json) {
        nlohmann::json j = {{"steps", opt.steps},          {"seed", opt.seed},
                            {"cycles", out.perf.cycles},   {"update_cycles", out.update_cycles},
                            {"propagation_cycles", out.propagation_cycles}, {"sops", out.sops},
                            {"dma_bytes", out.perf.dma_bytes}};
        for (const auto& [name, train] : out.spikes) j["spikes"][name] = train.count();
        fmt::print("{}\n", j.dump(2));
    } else {
        for (const auto& [name, train] : out.spikes) fmt::print("{}: {} spikes\n", name, train.count());
        fmt::print("cycles {}  update {}  propagation {}  sops {}\n", out.perf.cycles, out.update_cycles, out.propagation_cycles, out.sops);
    }
    write_outputs(a, out.spikes, out.records);
    return kOk;
}

int cmd_oracle_compare(NetArgs a) {
    const io::NetworkFile nf = io::load_network(a.model);
    const net::RunOptions opt = run_options(nf, a);
    const auto inputs = load_inputs(nf, opt.steps);
    const auto sim = net::elaborate_and_run(nf.model, inputs, opt);
    const auto gold = oracle::golden(nf.model, inputs, opt);
    const auto real = oracle::reference(nf.model, inputs, opt);
    for (const auto& [key, rows] : real.records) {
        const auto dot = key.find('.');
        const QFormat f = nf.model.population(key.substr(0, dot))->vars.at(key.substr(dot + 1)).format;
        double worst = 0;
        for (std::size_t t = 0; t < rows.size(); ++t)
            for (std::size_t j = 0; j < rows[t].size(); ++j)
                worst = std::max(worst, std::abs(rows[t][j] - to_double(Fx16(gold.records.at(key)[t][j]), f)));
        fmt::print("{}: max |double - fixed| = {:.6g}\n", key, worst);
    }
    const std::string diff = oracle::compare(gold, sim);
    if (!diff.empty()) {
        fmt::print("MISMATCH: {}\n", diff);
        return kMismatch;
    }
    fmt::print("simulator matches the fixed-point oracle ({} steps)\n", opt.steps);
    return kOk;
}

// ---- benchmarks ---------------------------------------------------------

struct BenchArgs {
    int neurons = 2560;
    double sparsity = 0.9;
    std::string encoding = "dense";
    int steps = 1000;
    std::uint64_t seed = 1;
    double clock = 175e6;
    bool csv = false;
    std::string fixture;
    int bias = -1;
    int w_exc = -1;
};

const char* kCsvHeader = "neurons,sparsity,encoding,steps,seed,cycles,update_cycles,propagation_cycles,sops,spikes,rate_hz,"
                         "modeled_s,theoretical_gsops,gsops,effective_gsops,padding";

bench::VaParams va_params(const BenchArgs& a) {
    bench::VaParams p = bench::default_va_params(a.neurons, a.sparsity);
    if (!a.fixture.empty()) {
        const auto tuned = bench::load_va_fixture(a.fixture, a.sparsity);
        auto it = tuned.find(a.neurons);
        if (it == tuned.end()) throw std::runtime_error(fmt::format("{} has no entry for {} neurons", a.fixture, a.neurons));
        p = it->second;
    }
    if (a.bias >= 0) p.bias = a.bias;
    if (a.w_exc >= 0) p.w_exc = a.w_exc;
    return p;
}

int cmd_bench_va(const BenchArgs& a) {
    bench::VaSpec s;
    s.neurons = a.neurons;
    s.sparsity = a.sparsity;
    s.encoding = kernels::parse_encoding(a.encoding);
    s.steps = a.steps;
    s.seed = a.seed;
    s.clock_hz = a.clock;
    const auto r = bench::run_va(s, va_params(a));
    if (a.csv) {
        fmt::print("{}\n{},{},{},{},{},{},{},{},{},{},{:.4f},{:.6f},{:.4f},{:.4f},{:.4f},{:.4f}\n", kCsvHeader, s.neurons, s.sparsity,
                   a.encoding, s.steps, s.seed, r.cycles, r.update_cycles, r.propagation_cycles, r.sops, r.spikes, r.rate_hz,
                   r.modeled_seconds, r.theoretical_gsops, r.gsops, r.effective_gsops, r.padding);
        return kOk;
    }
    fmt::print("balanced random network: {} neurons, {:.0f}% sparse, {} rows, {} steps\n", s.neurons, 100 * s.sparsity, a.encoding, s.steps);
    fmt::print("  cycles           {} (update {}, propagation {})\n", r.cycles, r.update_cycles, r.propagation_cycles);
    fmt::print("  spikes           {} ({:.2f} Hz)\n", r.spikes, r.rate_hz);
    fmt::print("  SOPs             {}\n", r.sops);
    fmt::print("  modeled time     {:.4f} s at {:.0f} MHz\n", r.modeled_seconds, s.clock_hz / 1e6);
    fmt::print("  peak             {:.3f} GSOP/s\n", r.theoretical_gsops);
    fmt::print("  measured         {:.3f} GSOP/s\n", r.gsops);
    fmt::print("  effective        {:.3f} GSOP/s\n", r.effective_gsops);
    if (s.encoding == kernels::Encoding::Compressed) fmt::print("  padding          {:.3f}\n", r.padding);
    return kOk;
}

int cmd_bench_tune(const BenchArgs& a, const std::vector<int>& sizes, double target, int tune_steps, const std::string& out) {
    std::map<int, bench::VaParams> tuned;
    if (!out.empty() && std::ifstream(out)) tuned = bench::load_va_fixture(out, a.sparsity);
    for (int n : sizes) {
        bench::VaSpec s;
        s.neurons = n;
        s.sparsity = a.sparsity;
        s.seed = a.seed;
        const auto p = bench::tune_va(s, target, tune_steps);
        fmt::print("{} neurons: bias {} w_exc {} g {} -> {:.2f} Hz\n", n, p.bias, p.w_exc, p.g, p.rate_hz);
        tuned[n] = p;
    }
    if (!out.empty()) bench::save_va_fixture(out, tuned, a.sparsity);
    return kOk;
}

std::vector<bench::PerfPoint> read_sweep(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::vector<std::string> header;
    std::vector<bench::PerfPoint> pts;
    auto split = [](const std::string& l) {
        std::vector<std::string> f;
        std::stringstream ss(l);
        for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
        return f;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split(line);
        if (f[0] == "neurons") {
            header = f;
            continue;
        }
        if (header.empty()) throw std::runtime_error(path + ": missing header");
        std::map<std::string, std::string> row;
        for (std::size_t k = 0; k < header.size() && k < f.size(); ++k) row[header[k]] = f[k];
        bench::PerfPoint p;
        p.neurons = std::stoi(row.at("neurons"));
        p.steps = std::stoi(row.at("steps"));
        p.sops = std::stoull(row.at("sops"));
        p.cycles = std::stoull(row.at("cycles"));
        pts.push_back(p);
    }
    return pts;
}

int cmd_fit_perf(const std::string& csv) {
    const auto pts = read_sweep(csv);
    const auto fit = bench::fit_perf(pts);
    fmt::print("c_neuron {:.4f} cycles/neuron/step\nc_sop {:.4f} cycles/SOP\nR2 {:.5f}\n", fit.c_neuron, fit.c_sop, fit.r2);
    for (const auto& p : pts)
        fmt::print("  N={:<6} measured {:>12}  predicted {:>14.0f}  ({:+.2f}%)\n", p.neurons, p.cycles, fit.predict(p),
                   100.0 * (fit.predict(p) - static_cast<double>(p.cycles)) / static_cast<double>(p.cycles));
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FeNN toolchain: assembler, simulator, network runner and benchmarks"};
    app.require_subcommand(1);

    std::string in, out, dump;
    std::uint64_t max_cycles = 1'000'000'000;
    bool trace = false;

    auto* a_asm = app.add_subcommand("asm", "assemble a source file into an image");
    a_asm->add_option("input", in, "assembly source")->required();
    a_asm->add_option("-o,--output", out, "image file")->required();

    auto* a_dis = app.add_subcommand("dis", "disassemble an image or source");
    a_dis->add_option("input", in, "image or .s file")->required();

    auto* a_run = app.add_subcommand("run", "run a program until ecall");
    a_run->add_option("input", in, "image or .s file")->required();
    a_run->add_option("--max-cycles", max_cycles, "cycle budget");
    a_run->add_flag("--trace", trace, "print one line per issued instruction");
    a_run->add_option("--dump", dump, "write data memories as an image");

    NetArgs na;
    auto add_net_options = [&](CLI::App* c) {
        c->add_option("--model", na.model, "network description (JSON)")->required();
        c->add_option("--steps", na.steps, "timesteps (default: from the model)");
        c->add_option("--record", na.record, "variables to record, pop.var");
        c->add_option("--seed", na.seed, "lane RNG seed");
    };
    auto* a_net = app.add_subcommand("net", "network commands");
    a_net->require_subcommand(1);
    auto* a_net_run = a_net->add_subcommand("run", "simulate a network");
    add_net_options(a_net_run);
    a_net_run->add_option("--out", na.out, "spike output (.fspk binary, otherwise text events)");
    a_net_run->add_option("--record-csv", na.record_csv, "recorded variables as CSV");
    a_net_run->add_flag("--json", na.json, "summary as JSON");

    auto* a_oracle = app.add_subcommand("oracle", "reference models");
    a_oracle->require_subcommand(1);
    auto* a_cmp = a_oracle->add_subcommand("compare", "simulator vs fixed-point oracle, plus double-precision error");
    add_net_options(a_cmp);

    BenchArgs ba;
    std::vector<int> sizes;
    double target = 10.0;
    int tune_steps = 300;
    auto* a_bench = app.add_subcommand("bench", "benchmarks");
    a_bench->require_subcommand(1);
    auto add_bench_options = [&](CLI::App* c) {
        c->add_option("--sparsity", ba.sparsity, "fraction of absent connections")->check(CLI::Range(0.0, 0.999));
        c->add_option("--seed", ba.seed, "network seed");
    };
    auto* a_va = a_bench->add_subcommand("va", "balanced random network");
    add_bench_options(a_va);
    a_va->add_option("--neurons", ba.neurons, "population size")->check(CLI::PositiveNumber);
    a_va->add_option("--encoding", ba.encoding, "dense | compressed | delayed")->check(CLI::IsMember({"dense", "compressed", "delayed"}));
    a_va->add_option("--steps", ba.steps, "timesteps of 1 ms");
    a_va->add_option("--clock", ba.clock, "clock frequency in Hz");
    a_va->add_flag("--csv", ba.csv, "machine-readable output");
    a_va->add_option("--fixture", ba.fixture, "tuned parameters (JSON)");
    a_va->add_option("--bias", ba.bias, "raw s3_12 bias override");
    a_va->add_option("--w-exc", ba.w_exc, "raw s3_12 excitatory weight override");
    auto* a_tune = a_bench->add_subcommand("tune", "fit the bias of the balanced network to a target rate");
    add_bench_options(a_tune);
    a_tune->add_option("--neurons", sizes, "population sizes")->required();
    a_tune->add_option("--target", target, "rate in Hz");
    a_tune->add_option("--tune-steps", tune_steps, "timesteps per trial");
    a_tune->add_option("--out", out, "fixture file to update");

    std::string csv;
    auto* a_fit = app.add_subcommand("fit", "model fitting");
    a_fit->require_subcommand(1);
    auto* a_fit_perf = a_fit->add_subcommand("perf", "fit cycles = c_neuron*N*T + c_sop*SOPs");
    a_fit_perf->add_option("csv", csv, "sweep results from `bench va --csv`")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*a_asm) return cmd_asm(in, out);
        if (*a_dis) return cmd_dis(in);
        if (*a_run) return cmd_run(in, max_cycles, trace, dump);
        if (*a_net_run) return cmd_net_run(na);
        if (*a_cmp) return cmd_oracle_compare(na);
        if (*a_va) return cmd_bench_va(ba);
        if (*a_tune) return cmd_bench_tune(ba, sizes, target, tune_steps, out);
        if (*a_fit_perf) return cmd_fit_perf(csv);
    } catch (const CLI::ValidationError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUsage;
    } catch (const Trap& e) {
        fmt::print(stderr, "trap: {}\n", e.what());
        return kTrap;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUsage;
    }
    return kUsage;
}
