// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fenn/net.hpp"

namespace fenn::bench {

// ---- random networks ----------------------------------------------------

struct RandomNetSpec {
    int n_in = 64;
    int n_out = 64;
    double sparsity = 0.5;
    kernels::Encoding encoding = kernels::Encoding::Dense;
    int n_delay = 1;
    int max_delay = -1; // defaults to n_delay - 1
    bool random_delays = false; // otherwise all zero
    bool recurrent = false;
    int max_weight = 300; // raw, s7_8
    std::uint64_t seed = 1;
};

/// Input "in" -> LIF population "out", optionally with a recurrent
/// connection out -> out. The weights depend only on the seed and the
/// shapes, so the same spec with another encoding is the same network.
net::Model random_network(const RandomNetSpec& spec);

/// Bernoulli spike train.
net::SpikeTrain random_train(int shape, int T, double p, std::uint64_t seed);

// ---- balanced random network --------------------------------------------

struct VaSpec {
    int neurons = 2560;
    double sparsity = 0.9;
    kernels::Encoding encoding = kernels::Encoding::Dense;
    int steps = 1000;
    std::uint64_t seed = 1;
    double clock_hz = 175e6;
};

/// Raw s3_12 quantities.
struct VaParams {
    int bias = 0;     // constant drive per step
    int w_exc = 0;    // excitatory weight; inhibitory is -g * w_exc
    double g = 5.0;
    double rate_hz = 0; // measured when tuned
};

inline constexpr QFormat kVaFormat{12, true};
inline constexpr double kVaTau = 20.0;
inline constexpr double kVaExcitatory = 0.8;

/// Weight scaled with the mean in-degree; the bias is a starting guess.
VaParams default_va_params(int neurons, double sparsity);

/// One population "va" with a recurrent connection whose first 80% of rows
/// are excitatory. Initial V uniform below threshold.
net::Model va_network(const VaSpec& spec, const VaParams& params);

struct VaReport {
    VaSpec spec;
    std::uint64_t cycles = 0;
    std::uint64_t update_cycles = 0;
    std::uint64_t propagation_cycles = 0;
    std::uint64_t sops = 0;
    std::uint64_t spikes = 0;
    double rate_hz = 0;           // 1 ms steps
    double modeled_seconds = 0;   // cycles / clock
    double theoretical_gsops = 0; // f * 32 / N
    double gsops = 0;             // sops / propagation time
    double effective_gsops = 0;   // gsops / (1 - sparsity)
    double padding = 0;           // compressed rows only
    std::uint64_t dma_bytes = 0;
    net::SpikeTrain raster;
};

VaReport run_va(const VaSpec& spec, const VaParams& params);

/// Bisects the bias so the mean rate over `steps` lands near `target_hz`.
VaParams tune_va(const VaSpec& spec, double target_hz, int steps = 300);

/// Fixture file: {"va": [{"neurons", "sparsity", "bias", "w_exc", "g", "rate_hz"}]}
std::map<int, VaParams> load_va_fixture(const std::string& path, double sparsity = 0.9);
void save_va_fixture(const std::string& path, const std::map<int, VaParams>& params, double sparsity = 0.9);

/// Padding share of compressed rows for random connectivity, computed from
/// per-lane counts without building the matrix. Every row uses the global
/// maximum lane length, as the encoder does.
double compressed_padding(int n_pre, int n_post, double sparsity, std::uint64_t seed);

// ---- performance model --------------------------------------------------

struct PerfPoint {
    int neurons = 0;
    int steps = 0;
    std::uint64_t sops = 0;
    std::uint64_t cycles = 0;
};

struct PerfFit {
    double c_neuron = 0; // cycles per neuron per step
    double c_sop = 0;    // cycles per synaptic operation
    double r2 = 0;
    double predict(const PerfPoint& p) const;
};

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Least squares for cycles = c_neuron * N * T + c_sop * SOPs.
PerfFit fit_perf(const std::vector<PerfPoint>& points);

} // namespace fenn::bench
