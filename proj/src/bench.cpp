// SPDX-License-Identifier: Apache-2.0
#include "fenn/bench.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

namespace fenn::bench {

using kernels::Encoding;

namespace {

// Calls f(col) for the nonzero columns of one Bernoulli(p) row.
template <class Rng, class F>
void sample_row(Rng& rng, int cols, double p, F&& f) {
    if (p <= 0) return;
    if (p >= 1) {
        for (int c = 0; c < cols; ++c) f(c);
        return;
    }
    std::geometric_distribution<int> skip(p);
    for (long c = skip(rng); c < cols; c += 1 + skip(rng)) f(static_cast<int>(c));
}

} // namespace

net::Model random_network(const RandomNetSpec& s) {
    std::mt19937_64 rng(s.seed);
    std::uniform_int_distribution<int> exc(1, s.max_weight);
    std::uniform_int_distribution<int> inh(-s.max_weight / 3, -1);
    std::uniform_int_distribution<int> sign(0, 3);
    std::uniform_int_distribution<int> delay(0, std::max(0, s.max_delay >= 0 ? s.max_delay : s.n_delay - 1));
    const double p = 1.0 - s.sparsity;

    auto make = [&](int rows, int cols, int scale, Matrix16& w, Matrix16& d) {
        w = Matrix16(rows, cols);
        d = Matrix16(rows, cols);
        for (int r = 0; r < rows; ++r)
            sample_row(rng, cols, p, [&](int c) {
                const int v = sign(rng) == 0 ? inh(rng) : exc(rng);
                w.at(r, c) = static_cast<std::int16_t>(v / scale == 0 ? (v < 0 ? -1 : 1) : v / scale);
                const int dl = delay(rng);
                if (s.random_delays) d.at(r, c) = static_cast<std::int16_t>(dl);
            });
    };

    net::Model m;
    m.inputs.push_back({"in", s.n_in});
    m.populations.push_back(net::lif_population("out", s.n_out, 20.0, 1.0));
    auto connect = [&](const std::string& name, const std::string& src, int rows, int scale) {
        net::Connection c;
        c.name = name;
        c.src = src;
        c.dst = "out";
        c.encoding = s.encoding;
        c.n_delay = s.n_delay;
        make(rows, s.n_out, scale, c.weights, c.delays);
        if (s.encoding != Encoding::Delayed) c.delays = {};
        m.connections.push_back(std::move(c));
    };
    connect("in_out", "in", s.n_in, 1);
    if (s.recurrent) connect("out_out", "out", s.n_out, 2);
    return m;
}

net::SpikeTrain random_train(int shape, int T, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    net::SpikeTrain s = net::make_train(shape, T);
    for (int t = 0; t < T; ++t) sample_row(rng, shape, p, [&](int n) { s.set(t, n); });
    return s;
}

// ---- balanced random network --------------------------------------------

VaParams default_va_params(int neurons, double sparsity) {
    VaParams p;
    const double k = std::max(1.0, neurons * (1.0 - sparsity));
    p.w_exc = std::max(1, static_cast<int>(std::lround(0.1 * 4096.0 / std::sqrt(k))));
    p.bias = 260;
    return p;
}

net::Model va_network(const VaSpec& spec, const VaParams& params) {
    const int n = spec.neurons;
    std::mt19937_64 rng(spec.seed);
    net::Model m;
    net::Population pop = net::lif_population("va", n, kVaTau, 1.0, kVaFormat, params.bias / 4096.0);
    std::uniform_int_distribution<int> v0(0, 4095);
    auto& v = pop.vars["V"].init_raw;
    for (int j = 0; j < n; ++j) v.push_back(static_cast<std::int16_t>(v0(rng)));
    m.populations.push_back(std::move(pop));

    net::Connection c;
    c.name = "rec";
    c.src = c.dst = "va";
    c.encoding = spec.encoding;
    c.format = kVaFormat;
    c.weights = Matrix16(n, n);
    const int n_exc = static_cast<int>(std::lround(kVaExcitatory * n));
    const auto w_inh = static_cast<std::int16_t>(-std::lround(params.g * params.w_exc));
    for (int r = 0; r < n; ++r) {
        const auto w = r < n_exc ? static_cast<std::int16_t>(params.w_exc) : w_inh;
        sample_row(rng, n, 1.0 - spec.sparsity, [&](int col) { c.weights.at(r, col) = w; });
    }
    m.connections.push_back(std::move(c));
    net::encode(m);
    m.connections[0].weights = {}; // the rows carry everything from here on
    return m;
}

VaReport run_va(const VaSpec& spec, const VaParams& params) {
    net::Model m = va_network(spec, params);
    VaReport r;
    r.spec = spec;
    if (spec.encoding == Encoding::Compressed) r.padding = m.connections[0].rows.padding_fraction();
    net::RunOptions opt;
    opt.steps = spec.steps;
    opt.seed = spec.seed;
    const net::SimOutputs out = net::elaborate_and_run(std::move(m), {}, opt);
    r.cycles = out.perf.cycles;
    r.update_cycles = out.update_cycles;
    r.propagation_cycles = out.propagation_cycles;
    r.sops = out.sops;
    r.raster = out.spikes.at("va");
    r.spikes = r.raster.count();
    r.dma_bytes = out.perf.dma_bytes;
    r.rate_hz = spec.steps > 0 ? static_cast<double>(r.spikes) / (spec.neurons * spec.steps * 1e-3) : 0.0;
    r.modeled_seconds = static_cast<double>(r.cycles) / spec.clock_hz;
    r.theoretical_gsops = kernels::theoretical_gsops(spec.encoding, spec.clock_hz);
    if (r.propagation_cycles > 0) {
        r.gsops = static_cast<double>(r.sops) / (static_cast<double>(r.propagation_cycles) / spec.clock_hz) / 1e9;
        r.effective_gsops = r.gsops / (1.0 - spec.sparsity);
    }
    return r;
}

VaParams tune_va(const VaSpec& spec, double target_hz, int steps) {
    VaSpec s = spec;
    s.steps = steps;
    VaParams p = default_va_params(spec.neurons, spec.sparsity);
    int lo = 0, hi = 2048;
    VaParams best = p;
    double best_err = INFINITY;
    while (lo <= hi) {
        p.bias = (lo + hi) / 2;
        const double rate = run_va(s, p).rate_hz;
        if (std::abs(rate - target_hz) < best_err) {
            best_err = std::abs(rate - target_hz);
            best = p;
            best.rate_hz = rate;
        }
        if (rate < target_hz) lo = p.bias + 1;
        else hi = p.bias - 1;
    }
    return best;
}

std::map<int, VaParams> load_va_fixture(const std::string& path, double sparsity) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    const auto j = nlohmann::json::parse(in);
    std::map<int, VaParams> out;
    for (const auto& e : j.at("va")) {
        if (std::abs(e.at("sparsity").get<double>() - sparsity) > 1e-9) continue;
        VaParams p;
        p.bias = e.at("bias").get<int>();
        p.w_exc = e.at("w_exc").get<int>();
        p.g = e.at("g").get<double>();
        p.rate_hz = e.value("rate_hz", 0.0);
        out[e.at("neurons").get<int>()] = p;
    }
    return out;
}

void save_va_fixture(const std::string& path, const std::map<int, VaParams>& params, double sparsity) {
    nlohmann::json j;
    j["note"] = "Tuned by `fenn bench tune`; raw s3_12 values.";
    j["va"] = nlohmann::json::array();
    for (const auto& [n, p] : params)
        j["va"].push_back({{"neurons", n}, {"sparsity", sparsity}, {"bias", p.bias}, {"w_exc", p.w_exc}, {"g", p.g}, {"rate_hz", p.rate_hz}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

double compressed_padding(int n_pre, int n_post, double sparsity, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> lanes(32);
    std::uint64_t total = 0;
    int longest = 0;
    for (int r = 0; r < n_pre; ++r) {
        std::fill(lanes.begin(), lanes.end(), 0);
        sample_row(rng, n_post, 1.0 - sparsity, [&](int c) { ++lanes[static_cast<std::size_t>(c % 32)]; });
        for (int x : lanes) {
            total += static_cast<std::uint64_t>(x);
            longest = std::max(longest, x);
        }
    }
    const double slots = static_cast<double>(n_pre) * longest * 32.0;
    return slots == 0 ? 0.0 : 1.0 - static_cast<double>(total) / slots;
}

// ---- performance model --------------------------------------------------

double PerfFit::predict(const PerfPoint& p) const {
    return c_neuron * static_cast<double>(p.neurons) * p.steps + c_sop * static_cast<double>(p.sops);
}

PerfFit fit_perf(const std::vector<PerfPoint>& points) {
    if (points.size() < 4) throw FitError(fmt::format("need at least 4 sweep points, got {}", points.size()));
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        X(i, 0) = static_cast<double>(p.neurons) * p.steps;
        X(i, 1) = static_cast<double>(p.sops);
        y(i) = static_cast<double>(p.cycles);
    }
    const auto qr = X.colPivHouseholderQr();
    if (qr.rank() < 2) throw FitError("degenerate sweep: neuron-steps and SOPs are not independent");
    const Eigen::Vector2d c = qr.solve(y);
    const double ss_res = (X * c - y).squaredNorm();
    const double ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
    PerfFit f;
    f.c_neuron = c(0);
    f.c_sop = c(1);
    f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

} // namespace fenn::bench
