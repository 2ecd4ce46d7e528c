#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sprs {

struct GrayImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major intensities

    GrayImage() = default;
    GrayImage(std::uint32_t w, std::uint32_t h)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t at(std::uint32_t row, std::uint32_t col) const {
        return pixels[static_cast<std::size_t>(row) * width + col];
    }
    std::uint8_t& at(std::uint32_t row, std::uint32_t col) {
        return pixels[static_cast<std::size_t>(row) * width + col];
    }
};

struct BinaryFrame {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> bits;  // row-major, one 0/1 value per pixel

    BinaryFrame() = default;
    BinaryFrame(std::uint32_t w, std::uint32_t h)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t get(std::uint32_t row, std::uint32_t col) const {
        return bits[static_cast<std::size_t>(row) * width + col];
    }
    void put(std::uint32_t row, std::uint32_t col, bool on) {
        bits[static_cast<std::size_t>(row) * width + col] = on ? 1 : 0;
    }

    std::uint32_t count_ones() const;
    // Flat indices (row * width + col) of the set pixels, ascending.
    std::vector<std::uint32_t> active_indices() const;

    bool operator==(const BinaryFrame&) const = default;
};

// Sobel gradient magnitude with replicated borders; a bit is set when the
// magnitude reaches threshold * (max magnitude in the image). A constant
// image comes back all clear.
BinaryFrame edge_filter(const GrayImage& img, double threshold = 0.25);

// Zhang-Suen thinning, iterated to a fixed point. Output bits are a subset
// of the input bits.
BinaryFrame skeletonize(const BinaryFrame& frame);

// PBM (P4) export/import, for inspection and the synthetic corpus.
void write_pbm(const BinaryFrame& frame, const std::string& path);
BinaryFrame read_pbm(const std::string& path);

// PGM (P5, 8-bit) grayscale frames.
void write_pgm(const GrayImage& img, const std::string& path);
GrayImage read_pgm(const std::string& path);

}  // namespace sprs
