#include "sprs/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "sprs/error.hpp"

namespace sprs {

DigitFrame preprocess_mnist(const GrayImage& raw, double threshold) {
    if (raw.width != 28 || raw.height != 28)
        throw ShapeError("preprocess_mnist: input must be 28x28");
    const BinaryFrame skel = skeletonize(edge_filter(raw, threshold));

    std::uint32_t rmin = skel.height, rmax = 0, cmin = skel.width, cmax = 0;
    bool any = false;
    for (std::uint32_t r = 0; r < skel.height; ++r) {
        for (std::uint32_t c = 0; c < skel.width; ++c) {
            if (!skel.get(r, c)) continue;
            any = true;
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
            cmin = std::min(cmin, c);
            cmax = std::max(cmax, c);
        }
    }

    DigitFrame out;
    out.frame = BinaryFrame(kDigitWidth, kDigitHeight);
    if (!any) {
        out.empty = true;
        return out;
    }

    const std::uint32_t w0 = cmax - cmin + 1;
    const std::uint32_t h0 = rmax - rmin + 1;
    const double scale = std::min(static_cast<double>(kDigitWidth) / w0,
                                  static_cast<double>(kDigitHeight) / h0);
    const auto out_w = std::clamp<std::uint32_t>(
        static_cast<std::uint32_t>(std::lround(w0 * scale)), 1, kDigitWidth);
    const auto out_h = std::clamp<std::uint32_t>(
        static_cast<std::uint32_t>(std::lround(h0 * scale)), 1, kDigitHeight);
    const std::uint32_t r_off = (kDigitHeight - out_h) / 2;
    const std::uint32_t c_off = (kDigitWidth - out_w) / 2;
    for (std::uint32_t r = 0; r < out_h; ++r) {
        const auto src_r = std::min<std::uint32_t>(
            h0 - 1, static_cast<std::uint32_t>((r + 0.5) * h0 / out_h));
        for (std::uint32_t c = 0; c < out_w; ++c) {
            const auto src_c = std::min<std::uint32_t>(
                w0 - 1, static_cast<std::uint32_t>((c + 0.5) * w0 / out_w));
            if (skel.get(rmin + src_r, cmin + src_c)) out.frame.put(r_off + r, c_off + c, true);
        }
    }
    return out;
}

std::uint32_t decimation_step(std::uint32_t n, std::uint32_t target) {
    if (n == 0) throw EmptyInputError("decimation_step: zero frames");
    std::uint32_t best_k = 1;
    std::uint32_t best_cost = UINT32_MAX;
    for (std::uint32_t k = 1; k <= n; ++k) {
        const std::uint32_t len = (n + k - 1) / k;
        if (len < 2 && n >= 2) continue;
        const std::uint32_t cost = len > target ? len - target : target - len;
        if (cost < best_cost) {
            best_cost = cost;
            best_k = k;
        }
    }
    return best_k;
}

std::vector<BinaryFrame> preprocess_video(const std::vector<GrayImage>& frames,
                                          std::uint32_t bbox_x, std::uint32_t bbox_y,
                                          std::uint32_t target_len, double threshold) {
    if (frames.empty()) throw EmptyInputError("preprocess_video: no frames");
    if (target_len == 0) throw ConfigError("preprocess_video: target length must be positive");
    for (const GrayImage& f : frames) {
        if (bbox_x + kVideoCropWidth > f.width || bbox_y + kVideoCropHeight > f.height)
            throw ShapeError("preprocess_video: crop box exceeds frame bounds");
    }

    std::vector<BinaryFrame> processed;
    processed.reserve(frames.size());
    for (const GrayImage& f : frames) {
        GrayImage small(kVideoWidth, kVideoHeight);
        for (std::uint32_t r = 0; r < kVideoHeight; ++r) {
            for (std::uint32_t c = 0; c < kVideoWidth; ++c) {
                const std::uint32_t sr = bbox_y + 2 * r;
                const std::uint32_t sc = bbox_x + 2 * c;
                const std::uint32_t sum = f.at(sr, sc) + f.at(sr, sc + 1) + f.at(sr + 1, sc) +
                                          f.at(sr + 1, sc + 1);
                small.at(r, c) = static_cast<std::uint8_t>((sum + 2) / 4);
            }
        }
        processed.push_back(skeletonize(edge_filter(small, threshold)));
    }

    const std::uint32_t k = decimation_step(static_cast<std::uint32_t>(processed.size()), target_len);
    std::vector<BinaryFrame> out;
    for (std::size_t i = 0; i < processed.size(); i += k) out.push_back(std::move(processed[i]));
    return out;
}

namespace {

inline std::uint32_t chebyshev(std::uint32_t r0, std::uint32_t c0, std::uint32_t r1,
                               std::uint32_t c1) {
    const std::uint32_t dr = r0 > r1 ? r0 - r1 : r1 - r0;
    const std::uint32_t dc = c0 > c1 ? c0 - c1 : c1 - c0;
    return std::max(dr, dc);
}

bool has_set_neighbor(const BinaryFrame& f, std::uint32_t r, std::uint32_t c) {
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const std::int64_t nr = static_cast<std::int64_t>(r) + dr;
            const std::int64_t nc = static_cast<std::int64_t>(c) + dc;
            if (nr < 0 || nc < 0 || nr >= f.height || nc >= f.width) continue;
            if (f.get(static_cast<std::uint32_t>(nr), static_cast<std::uint32_t>(nc))) return true;
        }
    }
    return false;
}

}  // namespace

BinaryFrame add_pixel_noise(const BinaryFrame& frame, double fraction, Rng& rng,
                            std::uint32_t* fallbacks) {
    if (fraction < 0.0 || fraction > 1.0)
        throw ConfigError("add_pixel_noise: fraction outside [0, 1]");
    if (fallbacks) *fallbacks = 0;

    BinaryFrame out = frame;
    std::vector<std::uint32_t> ones = frame.active_indices();
    const auto n = static_cast<std::uint32_t>(ones.size());
    const auto moves = static_cast<std::uint32_t>(fraction * n);
    if (moves == 0) return out;

    // Victims: a uniform m-subset via partial Fisher-Yates.
    for (std::uint32_t i = 0; i < moves; ++i)
        std::swap(ones[i], ones[i + rng.below(n - i)]);

    for (std::uint32_t i = 0; i < moves; ++i) out.bits[ones[i]] = 0;

    std::vector<std::uint32_t> candidates;
    for (std::uint32_t i = 0; i < moves; ++i) {
        const std::uint32_t vr = ones[i] / frame.width;
        const std::uint32_t vc = ones[i] % frame.width;
        candidates.clear();
        const std::uint32_t r0 = vr >= 2 ? vr - 2 : 0;
        const std::uint32_t r1 = std::min(vr + 2, frame.height - 1);
        const std::uint32_t c0 = vc >= 2 ? vc - 2 : 0;
        const std::uint32_t c1 = std::min(vc + 2, frame.width - 1);
        for (std::uint32_t r = r0; r <= r1; ++r) {
            for (std::uint32_t c = c0; c <= c1; ++c) {
                const std::uint32_t id = r * frame.width + c;
                if (frame.bits[id] || out.bits[id]) continue;  // only off-in-input, still-off cells
                if (chebyshev(vr, vc, r, c) > 2) continue;     // (always true inside the window)
                if (has_set_neighbor(out, r, c)) candidates.push_back(id);
            }
        }
        if (candidates.empty()) {
            out.bits[ones[i]] = 1;  // no legal home: the pixel stays put
            if (fallbacks) ++*fallbacks;
        } else {
            out.bits[candidates[rng.below(static_cast<std::uint32_t>(candidates.size()))]] = 1;
        }
    }
    return out;
}

std::vector<Snippet> augment_dataset(const std::vector<Snippet>& originals,
                                     std::uint32_t variants, const Rng& base, double fraction,
                                     std::uint64_t* fallbacks) {
    if (fallbacks) *fallbacks = 0;
    std::vector<Snippet> out;
    out.reserve(originals.size() * (1 + static_cast<std::size_t>(variants)));
    for (std::uint32_t i = 0; i < originals.size(); ++i) {
        Snippet original = originals[i];
        original.variant = 0;
        out.push_back(original);
        for (std::uint32_t v = 1; v <= variants; ++v) {
            Snippet noisy = originals[i];
            noisy.variant = v;
            for (std::uint32_t f = 0; f < noisy.frames.size(); ++f) {
                Rng rng = base.derive({i, v, f});
                std::uint32_t dropped = 0;
                noisy.frames[f] = add_pixel_noise(noisy.frames[f], fraction, rng, &dropped);
                if (fallbacks) *fallbacks += dropped;
            }
            out.push_back(std::move(noisy));
        }
    }
    return out;
}

}  // namespace sprs
