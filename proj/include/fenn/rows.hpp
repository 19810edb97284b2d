// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fenn/kernels.hpp"

namespace fenn {

/// Row-major matrix of raw 16-bit values (weights or delays).
struct Matrix16 {
    int rows = 0;
    int cols = 0;
    std::vector<std::int16_t> data;

    Matrix16() = default;
    Matrix16(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c)) {}
    std::int16_t& at(int r, int c) { return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
    std::int16_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
};

struct ConnectivityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Per-source rows of connection words with one stride for every row.
struct RowMatrix {
    kernels::Encoding encoding = kernels::Encoding::Dense;
    int n_pre = 0;
    int n_post = 0;      // padded to a multiple of 32
    int row_vectors = 0;
    int index_bits = 0;
    int delay_bits = 0;
    std::vector<std::int16_t> words; // n_pre * row_vectors * 32
    std::vector<std::uint32_t> row_connections; // nonzero synapses per row
    std::uint64_t connections = 0;

    std::uint32_t stride_bytes() const { return static_cast<std::uint32_t>(row_vectors) * 64u; }
    std::size_t row_halfwords() const { return static_cast<std::size_t>(row_vectors) * 32u; }
    const std::int16_t* row(int src) const { return words.data() + static_cast<std::size_t>(src) * row_halfwords(); }
    /// Share of row slots holding padding rather than a synapse.
    double padding_fraction() const;
};

int pad32(int n);
/// Smallest b with 2^b >= n.
int ceil_log2(int n);

RowMatrix build_dense_rows(const Matrix16& weights);

/// Lane i of each row takes the row's nonzero targets with target % 32 == i,
/// in ascending order, packed as (weight << index_bits) | target / 32. Short
/// lanes are padded with zero words. index_bits < 0 picks ceil(log2(N_target)).
RowMatrix build_compressed_rows(const Matrix16& weights, int index_bits = -1);

/// Dense target layout with the delay in the low bits: (weight << log2 n_delay) | delay.
RowMatrix build_delayed_rows(const Matrix16& weights, const Matrix16& delays, int n_delay);

/// Per-synapse weight reconstructed from any encoding, for checks.
Matrix16 decode_rows(const RowMatrix& rows);

} // namespace fenn
