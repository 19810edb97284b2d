// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fenn/net.hpp"

namespace fenn::io {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// FMAT: "FMAT", u32 version (1), u32 rows, u32 cols, then rows*cols
/// little-endian int16 raw values, row-major.
Matrix16 read_fmat(const std::string& path);
void write_fmat(const std::string& path, const Matrix16& m);

/// FSPK: "FSPK", u32 version (1), u32 shape, u32 T, then T*ceil(shape/32)
/// little-endian u32 bitfield words; neuron n is bit n%32 of word n/32.
net::SpikeTrain read_fspk(const std::string& path);
void write_fspk(const std::string& path, const net::SpikeTrain& s);

/// Text event list, one "t neuron_id" per line, '#' starts a comment.
net::SpikeTrain read_events(std::istream& in, int shape, int T);
void write_events(std::ostream& out, const net::SpikeTrain& s);

/// Either format, told apart by the magic.
net::SpikeTrain read_spikes(const std::string& path, int shape, int T);

struct NetworkFile {
    net::Model model;
    std::vector<std::string> record; // "pop.var"
    std::map<std::string, std::string> input_files; // input -> spike file
    int steps = 0;
};

/// Reads the JSON description; relative file names resolve against the
/// directory of `path`.
NetworkFile load_network(const std::string& path);

} // namespace fenn::io
