// SPDX-License-Identifier: Apache-2.0
#include "fenn/rows.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace fenn {

using kernels::Encoding;

int pad32(int n) { return (n + 31) / 32 * 32; }

int ceil_log2(int n) {
    int b = 0;
    while ((1 << b) < n) ++b;
    return b;
}

double RowMatrix::padding_fraction() const {
    const double slots = static_cast<double>(words.size());
    return slots == 0 ? 0.0 : 1.0 - static_cast<double>(connections) / slots;
}

namespace {

void check_fits(std::int16_t w, int value_bits, int src, int dst) {
    const int lo = -(1 << (value_bits - 1));
    const int hi = (1 << (value_bits - 1)) - 1;
    if (w < lo || w > hi)
        throw ConnectivityError(fmt::format("synapse {} -> {}: weight {} does not fit in {} bits", src, dst, w, value_bits));
}

std::int16_t pack(std::int16_t w, int shift, int low) {
    return static_cast<std::int16_t>(static_cast<std::uint16_t>((static_cast<std::uint32_t>(w) << shift) | static_cast<std::uint32_t>(low)));
}

} // namespace

RowMatrix build_dense_rows(const Matrix16& w) {
    RowMatrix m;
    m.encoding = Encoding::Dense;
    m.n_pre = w.rows;
    m.n_post = pad32(w.cols);
    m.row_vectors = m.n_post / 32;
    m.words.assign(static_cast<std::size_t>(m.n_pre) * m.row_halfwords(), 0);
    m.row_connections.assign(static_cast<std::size_t>(m.n_pre), 0);
    for (int r = 0; r < w.rows; ++r) {
        std::int16_t* row = m.words.data() + static_cast<std::size_t>(r) * m.row_halfwords();
        for (int c = 0; c < w.cols; ++c) {
            row[c] = w.at(r, c);
            if (row[c] != 0) ++m.row_connections[static_cast<std::size_t>(r)];
        }
        m.connections += m.row_connections[static_cast<std::size_t>(r)];
    }
    return m;
}

RowMatrix build_compressed_rows(const Matrix16& w, int index_bits) {
    RowMatrix m;
    m.encoding = Encoding::Compressed;
    m.n_pre = w.rows;
    m.n_post = pad32(w.cols);
    const int n_target = m.n_post / 32;
    m.index_bits = index_bits < 0 ? ceil_log2(n_target) : index_bits;
    if ((1 << m.index_bits) < n_target) throw ConnectivityError("index bits cannot address every target");
    if (m.index_bits > 15) throw ConnectivityError("no bits left for weights");
    const int weight_bits = 16 - m.index_bits;

    // per row, per lane: local indices and weights in ascending target order
    std::vector<std::vector<std::int16_t>> lanes(32);
    std::vector<std::vector<std::int16_t>> packed_rows(static_cast<std::size_t>(m.n_pre));
    int vectors = 1;
    m.row_connections.assign(static_cast<std::size_t>(m.n_pre), 0);
    std::vector<int> counts(static_cast<std::size_t>(m.n_pre));
    for (int r = 0; r < w.rows; ++r) {
        for (auto& l : lanes) l.clear();
        for (int c = 0; c < w.cols; ++c) {
            const std::int16_t x = w.at(r, c);
            if (x == 0) continue;
            check_fits(x, weight_bits, r, c);
            lanes[static_cast<std::size_t>(c % 32)].push_back(pack(x, m.index_bits, c / 32));
        }
        std::size_t longest = 0;
        for (const auto& l : lanes) longest = std::max(longest, l.size());
        auto& out = packed_rows[static_cast<std::size_t>(r)];
        out.assign(longest * 32, 0);
        for (std::size_t lane = 0; lane < 32; ++lane)
            for (std::size_t k = 0; k < lanes[lane].size(); ++k) out[k * 32 + lane] = lanes[lane][k];
        std::uint32_t n = 0;
        for (const auto& l : lanes) n += static_cast<std::uint32_t>(l.size());
        m.row_connections[static_cast<std::size_t>(r)] = n;
        m.connections += n;
        vectors = std::max(vectors, static_cast<int>(longest));
    }
    m.row_vectors = vectors;
    m.words.assign(static_cast<std::size_t>(m.n_pre) * m.row_halfwords(), 0);
    for (int r = 0; r < m.n_pre; ++r) {
        const auto& src = packed_rows[static_cast<std::size_t>(r)];
        std::copy(src.begin(), src.end(), m.words.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(r) * m.row_halfwords()));
    }
    return m;
}

RowMatrix build_delayed_rows(const Matrix16& w, const Matrix16& d, int n_delay) {
    if (n_delay <= 0 || (n_delay & (n_delay - 1)) != 0) throw ConnectivityError("n_delay must be a power of two");
    if (d.rows != w.rows || d.cols != w.cols) throw ConnectivityError("delay matrix shape differs from weights");
    RowMatrix m = build_dense_rows(w);
    m.encoding = Encoding::Delayed;
    m.delay_bits = ceil_log2(n_delay);
    const int weight_bits = 16 - m.delay_bits;
    for (int r = 0; r < w.rows; ++r) {
        std::int16_t* row = m.words.data() + static_cast<std::size_t>(r) * m.row_halfwords();
        for (int c = 0; c < w.cols; ++c) {
            const int delay = d.at(r, c);
            if (delay < 0 || delay >= n_delay)
                throw ConnectivityError(fmt::format("synapse {} -> {}: delay {} outside [0, {})", r, c, delay, n_delay));
            if (m.delay_bits == 0) continue;
            check_fits(w.at(r, c), weight_bits, r, c);
            row[c] = pack(w.at(r, c), m.delay_bits, delay);
        }
    }
    return m;
}

Matrix16 decode_rows(const RowMatrix& m) {
    Matrix16 w(m.n_pre, m.n_post);
    for (int r = 0; r < m.n_pre; ++r) {
        const std::int16_t* row = m.row(r);
        for (int k = 0; k < m.row_vectors; ++k) {
            for (int lane = 0; lane < 32; ++lane) {
                const std::int16_t x = row[k * 32 + lane];
                switch (m.encoding) {
                case Encoding::Dense: w.at(r, k * 32 + lane) = x; break;
                case Encoding::Delayed: w.at(r, k * 32 + lane) = static_cast<std::int16_t>(x >> m.delay_bits); break;
                case Encoding::Compressed: {
                    const int idx = x & ((1 << m.index_bits) - 1);
                    const auto v = static_cast<std::int16_t>(x >> m.index_bits);
                    if (v != 0) w.at(r, idx * 32 + lane) = v;
                    break;
                }
                }
            }
        }
    }
    return w;
}

} // namespace fenn
