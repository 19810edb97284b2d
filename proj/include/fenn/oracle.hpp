// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "fenn/net.hpp"

namespace fenn::oracle {

struct Outputs {
    std::map<std::string, net::SpikeTrain> spikes;
    std::map<std::string, std::vector<std::vector<std::int16_t>>> records;
};

enum class DelayModel : std::uint8_t {
    Ring,  // circular buffer of N_delay input slots per neuron
    Queue, // explicit list of pending (arrival step, target, weight) events
};

/// Host model of the network with the same fixed-point operations as the
/// simulator: kernels through the typed-AST interpreter, propagation source
/// words ascending, bits descending, one saturating add per synapse.
Outputs golden(net::Model model, const std::map<std::string, net::SpikeTrain>& inputs, const net::RunOptions& opt,
               DelayModel delays = DelayModel::Ring);

struct RealOutputs {
    std::map<std::string, net::SpikeTrain> spikes;
    std::map<std::string, std::vector<std::vector<double>>> records;
};

/// The same network in double precision: parameters and weights at their
/// real values, no rounding, no saturation. For quantization error only.
RealOutputs reference(net::Model model, const std::map<std::string, net::SpikeTrain>& inputs, const net::RunOptions& opt);

/// First difference between two runs, empty when they agree.
std::string compare(const Outputs& a, const net::SimOutputs& b);

} // namespace fenn::oracle
