#pragma once

#include <cstdint>
#include <cstddef>
#include <span>
#include <vector>

namespace sprs {

// Dense binary matrix, bit-packed per row into 64-bit words.
//
// The wire layout is row-major bytes: bit j of a row lives in byte j/8 at
// bit position j%8 (least-significant bit first). The in-memory word layout
// matches that byte order on little- and big-endian hosts because packing and
// unpacking always go through explicit shifts, never through memcpy.
class BitMatrix {
public:
    BitMatrix() = default;
    BitMatrix(std::uint32_t rows, std::uint32_t cols)
        : rows_(rows), cols_(cols), words_per_row_((cols + 63) / 64),
          words_(static_cast<std::size_t>(rows) * words_per_row_, 0) {}

    std::uint32_t rows() const { return rows_; }
    std::uint32_t cols() const { return cols_; }

    bool test(std::uint32_t row, std::uint32_t col) const {
        return (row_ptr(row)[col >> 6] >> (col & 63)) & 1u;
    }

    // Returns true if the bit was newly set (0 -> 1 transition).
    bool set(std::uint32_t row, std::uint32_t col) {
        std::uint64_t& word = row_mut(row)[col >> 6];
        const std::uint64_t mask = 1ull << (col & 63);
        const bool fresh = !(word & mask);
        word |= mask;
        return fresh;
    }

    // Number of active columns (sorted or not) whose bit is set in `row`.
    std::uint32_t count_matches(std::uint32_t row, std::span<const std::uint32_t> cols) const {
        const std::uint64_t* w = row_ptr(row);
        std::uint32_t n = 0;
        for (std::uint32_t c : cols) n += (w[c >> 6] >> (c & 63)) & 1u;
        return n;
    }

    std::uint64_t count_ones() const {
        std::uint64_t n = 0;
        for (std::uint64_t w : words_) n += static_cast<std::uint64_t>(__builtin_popcountll(w));
        return n;
    }

    // Column indices set in `row`, ascending.
    std::vector<std::uint32_t> row_indices(std::uint32_t row) const {
        std::vector<std::uint32_t> out;
        const std::uint64_t* w = row_ptr(row);
        for (std::uint32_t c = 0; c < cols_; ++c)
            if ((w[c >> 6] >> (c & 63)) & 1u) out.push_back(c);
        return out;
    }

    std::size_t bytes_per_row() const { return (cols_ + 7) / 8; }

    // Row-major bit-packed bytes, LSB-first within each byte.
    void append_bytes(std::vector<std::uint8_t>& out) const {
        const std::size_t row_bytes = bytes_per_row();
        for (std::uint32_t r = 0; r < rows_; ++r) {
            const std::uint64_t* w = row_ptr(r);
            for (std::size_t b = 0; b < row_bytes; ++b)
                out.push_back(static_cast<std::uint8_t>(w[b >> 3] >> ((b & 7) * 8)));
        }
    }

    // Inverse of append_bytes; `data` must hold rows()*bytes_per_row() bytes.
    void load_bytes(std::span<const std::uint8_t> data) {
        const std::size_t row_bytes = bytes_per_row();
        std::size_t pos = 0;
        for (std::uint32_t r = 0; r < rows_; ++r) {
            std::uint64_t* w = row_mut(r);
            for (std::size_t b = 0; b < row_bytes; ++b)
                w[b >> 3] |= static_cast<std::uint64_t>(data[pos++]) << ((b & 7) * 8);
        }
    }

    bool operator==(const BitMatrix& other) const = default;

private:
    const std::uint64_t* row_ptr(std::uint32_t row) const {
        return words_.data() + static_cast<std::size_t>(row) * words_per_row_;
    }
    std::uint64_t* row_mut(std::uint32_t row) {
        return words_.data() + static_cast<std::size_t>(row) * words_per_row_;
    }

    std::uint32_t rows_ = 0;
    std::uint32_t cols_ = 0;
    std::uint32_t words_per_row_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace sprs
