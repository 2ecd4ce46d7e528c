#include "sprs/idx.hpp"

#include <fstream>

#include "sprs/error.hpp"

namespace sprs {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
    std::uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("idx: truncated header in " + path);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | b[3];
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(b, 4);
}

}  // namespace

std::vector<GrayImage> read_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("idx: cannot open " + path);
    if (read_u32_be(in, path) != kImageMagic) throw DataError("idx: bad image magic in " + path);
    const std::uint32_t count = read_u32_be(in, path);
    const std::uint32_t rows = read_u32_be(in, path);
    const std::uint32_t cols = read_u32_be(in, path);
    if (rows == 0 || cols == 0) throw DataError("idx: zero image dims in " + path);

    std::vector<GrayImage> images;
    images.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        GrayImage img(cols, rows);
        in.read(reinterpret_cast<char*>(img.pixels.data()),
                static_cast<std::streamsize>(img.pixels.size()));
        if (!in) throw DataError("idx: truncated image data in " + path);
        images.push_back(std::move(img));
    }
    return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("idx: cannot open " + path);
    if (read_u32_be(in, path) != kLabelMagic) throw DataError("idx: bad label magic in " + path);
    const std::uint32_t count = read_u32_be(in, path);
    std::vector<std::uint8_t> labels(count);
    in.read(reinterpret_cast<char*>(labels.data()), count);
    if (!in) throw DataError("idx: truncated label data in " + path);
    return labels;
}

void write_idx_images(const std::vector<GrayImage>& images, const std::string& path) {
    if (images.empty()) throw EmptyInputError("idx: no images to write");
    const std::uint32_t rows = images[0].height;
    const std::uint32_t cols = images[0].width;
    for (const GrayImage& img : images)
        if (img.height != rows || img.width != cols)
            throw ShapeError("idx: images must share dimensions");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("idx: cannot open " + path);
    write_u32_be(out, kImageMagic);
    write_u32_be(out, static_cast<std::uint32_t>(images.size()));
    write_u32_be(out, rows);
    write_u32_be(out, cols);
    for (const GrayImage& img : images)
        out.write(reinterpret_cast<const char*>(img.pixels.data()),
                  static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw DataError("idx: write failed for " + path);
}

void write_idx_labels(const std::vector<std::uint8_t>& labels, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("idx: cannot open " + path);
    write_u32_be(out, kLabelMagic);
    write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    if (!out) throw DataError("idx: write failed for " + path);
}

}  // namespace sprs
