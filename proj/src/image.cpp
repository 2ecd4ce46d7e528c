#include "sprs/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "sprs/error.hpp"

namespace sprs {

std::uint32_t BinaryFrame::count_ones() const {
    return static_cast<std::uint32_t>(
        std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<std::uint32_t> BinaryFrame::active_indices() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) out.push_back(i);
    }
    return out;
}

namespace {

// Pixel fetch with edge replication so the 3x3 kernels stay in bounds.
inline int clamped(const GrayImage& img, std::int64_t row, std::int64_t col) {
    row = std::clamp<std::int64_t>(row, 0, img.height - 1);
    col = std::clamp<std::int64_t>(col, 0, img.width - 1);
    return img.at(static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(col));
}

}  // namespace

BinaryFrame edge_filter(const GrayImage& img, double threshold) {
    if (img.width == 0 || img.height == 0) throw EmptyInputError("edge_filter: empty image");
    if (threshold < 0.0 || threshold > 1.0) throw ConfigError("edge_filter: threshold outside [0, 1]");

    std::vector<double> magnitude(img.pixels.size(), 0.0);
    double peak = 0.0;
    for (std::int64_t r = 0; r < img.height; ++r) {
        for (std::int64_t c = 0; c < img.width; ++c) {
            const int p00 = clamped(img, r - 1, c - 1), p01 = clamped(img, r - 1, c), p02 = clamped(img, r - 1, c + 1);
            const int p10 = clamped(img, r, c - 1), p12 = clamped(img, r, c + 1);
            const int p20 = clamped(img, r + 1, c - 1), p21 = clamped(img, r + 1, c), p22 = clamped(img, r + 1, c + 1);
            const int gx = (p02 + 2 * p12 + p22) - (p00 + 2 * p10 + p20);
            const int gy = (p20 + 2 * p21 + p22) - (p00 + 2 * p01 + p02);
            const double mag = std::hypot(static_cast<double>(gx), static_cast<double>(gy));
            magnitude[static_cast<std::size_t>(r) * img.width + c] = mag;
            peak = std::max(peak, mag);
        }
    }

    BinaryFrame out(img.width, img.height);
    if (peak == 0.0) return out;  // constant image: no edges
    const double cut = threshold * peak;
    for (std::size_t i = 0; i < magnitude.size(); ++i) out.bits[i] = magnitude[i] >= cut ? 1 : 0;
    return out;
}

namespace {

// Neighbor order for Zhang-Suen: P2..P9 clockwise from north.
constexpr int kNbrRow[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kNbrCol[8] = {0, 1, 1, 1, 0, -1, -1, -1};

inline std::uint8_t nbr(const BinaryFrame& f, std::uint32_t r, std::uint32_t c, int i) {
    const std::int64_t nr = static_cast<std::int64_t>(r) + kNbrRow[i];
    const std::int64_t nc = static_cast<std::int64_t>(c) + kNbrCol[i];
    if (nr < 0 || nc < 0 || nr >= f.height || nc >= f.width) return 0;
    return f.get(static_cast<std::uint32_t>(nr), static_cast<std::uint32_t>(nc));
}

}  // namespace

BinaryFrame skeletonize(const BinaryFrame& frame) {
    if (frame.width == 0 || frame.height == 0) throw EmptyInputError("skeletonize: empty frame");

    BinaryFrame cur = frame;
    std::vector<std::uint32_t> doomed;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            doomed.clear();
            for (std::uint32_t r = 0; r < cur.height; ++r) {
                for (std::uint32_t c = 0; c < cur.width; ++c) {
                    if (!cur.get(r, c)) continue;
                    std::uint8_t p[8];
                    int black = 0;
                    for (int i = 0; i < 8; ++i) {
                        p[i] = nbr(cur, r, c, i);
                        black += p[i];
                    }
                    if (black < 2 || black > 6) continue;
                    int transitions = 0;  // 0 -> 1 steps around P2..P9..P2
                    for (int i = 0; i < 8; ++i) transitions += (p[i] == 0 && p[(i + 1) % 8] == 1);
                    if (transitions != 1) continue;
                    // p[0]=N, p[2]=E, p[4]=S, p[6]=W
                    if (pass == 0) {
                        if (p[0] && p[2] && p[4]) continue;
                        if (p[2] && p[4] && p[6]) continue;
                    } else {
                        if (p[0] && p[2] && p[6]) continue;
                        if (p[0] && p[4] && p[6]) continue;
                    }
                    doomed.push_back(r * cur.width + c);
                }
            }
            for (std::uint32_t idx : doomed) cur.bits[idx] = 0;
            changed = changed || !doomed.empty();
        }
    }
    return cur;
}

void write_pbm(const BinaryFrame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_pbm: cannot open " + path);
    out << "P4\n" << frame.width << " " << frame.height << "\n";
    const std::uint32_t row_bytes = (frame.width + 7) / 8;
    std::vector<std::uint8_t> row(row_bytes);
    for (std::uint32_t r = 0; r < frame.height; ++r) {
        std::fill(row.begin(), row.end(), 0);
        for (std::uint32_t c = 0; c < frame.width; ++c) {
            if (frame.get(r, c)) row[c / 8] |= static_cast<std::uint8_t>(0x80u >> (c % 8));
        }
        out.write(reinterpret_cast<const char*>(row.data()), row_bytes);
    }
    if (!out) throw DataError("write_pbm: write failed for " + path);
}

namespace {

// Skips whitespace and `#` comments between PNM header tokens.
std::string pnm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

}  // namespace

BinaryFrame read_pbm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("read_pbm: cannot open " + path);
    if (pnm_token(in) != "P4") throw DataError("read_pbm: not a P4 file: " + path);
    const std::uint32_t width = static_cast<std::uint32_t>(std::stoul(pnm_token(in)));
    const std::uint32_t height = static_cast<std::uint32_t>(std::stoul(pnm_token(in)));
    if (width == 0 || height == 0) throw DataError("read_pbm: zero dimension in " + path);

    BinaryFrame frame(width, height);
    const std::uint32_t row_bytes = (width + 7) / 8;
    std::vector<char> row(row_bytes);
    for (std::uint32_t r = 0; r < height; ++r) {
        in.read(row.data(), row_bytes);
        if (!in) throw DataError("read_pbm: truncated data in " + path);
        for (std::uint32_t c = 0; c < width; ++c) {
            const auto byte = static_cast<std::uint8_t>(row[c / 8]);
            frame.put(r, c, (byte >> (7 - c % 8)) & 1u);
        }
    }
    return frame;
}

void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_pgm: cannot open " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw DataError("write_pgm: write failed for " + path);
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("read_pgm: cannot open " + path);
    if (pnm_token(in) != "P5") throw DataError("read_pgm: not a P5 file: " + path);
    const std::uint32_t width = static_cast<std::uint32_t>(std::stoul(pnm_token(in)));
    const std::uint32_t height = static_cast<std::uint32_t>(std::stoul(pnm_token(in)));
    const std::uint32_t maxval = static_cast<std::uint32_t>(std::stoul(pnm_token(in)));
    if (width == 0 || height == 0) throw DataError("read_pgm: zero dimension in " + path);
    if (maxval == 0 || maxval > 255) throw DataError("read_pgm: unsupported maxval in " + path);

    GrayImage img(width, height);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (!in) throw DataError("read_pgm: truncated data in " + path);
    return img;
}

}  // namespace sprs
