#pragma once

#include <cstdint>
#include <vector>

#include "sprs/image.hpp"
#include "sprs/rng.hpp"

namespace sprs {

// A labeled frame sequence. variant 0 is an original; n >= 1 marks the n-th
// noisy copy produced by augment_dataset.
struct Snippet {
    std::vector<BinaryFrame> frames;
    std::uint32_t class_label = 0;
    std::uint32_t actor_id = 0;
    std::uint32_t variant = 0;
};

// preprocess_mnist output; `empty` flags inputs with no bits left after
// filtering (the frame is then all zeros).
struct DigitFrame {
    BinaryFrame frame;
    bool empty = false;
};

constexpr std::uint32_t kDigitWidth = 16;
constexpr std::uint32_t kDigitHeight = 24;
constexpr std::uint32_t kVideoCropWidth = 84;
constexpr std::uint32_t kVideoCropHeight = 120;
constexpr std::uint32_t kVideoWidth = 42;
constexpr std::uint32_t kVideoHeight = 60;

// 28x28 grayscale digit -> edge filter -> thinning -> tight bounding box ->
// aspect-preserving nearest-neighbor scale, centered in a 16x24 frame.
DigitFrame preprocess_mnist(const GrayImage& raw, double threshold = 0.25);

// Grayscale video -> crop an 84x120 box at (x, y) -> 2x box downsample to
// 42x60 -> edge filter + thinning per frame -> keep every k-th frame, with k
// picked so the output length lands nearest target_len (>= 2 frames kept
// whenever the input has that many).
std::vector<BinaryFrame> preprocess_video(const std::vector<GrayImage>& frames,
                                          std::uint32_t bbox_x, std::uint32_t bbox_y,
                                          std::uint32_t target_len = 10,
                                          double threshold = 0.25);

// The k used by preprocess_video for an n-frame input (exposed for tests):
// minimizes |ceil(n/k) - target|, ties to the smallest k, never cutting an
// input of >= 2 frames below 2.
std::uint32_t decimation_step(std::uint32_t n, std::uint32_t target);

// Moves floor(fraction * n) of the n set bits: each victim is cleared and a
// clear cell within radius 2 of it, 8-adjacent to a currently set bit, is
// set (uniform among candidates). A victim with no candidate stays put and
// is tallied in *fallbacks. The set-bit count never changes.
BinaryFrame add_pixel_noise(const BinaryFrame& frame, double fraction, Rng& rng,
                            std::uint32_t* fallbacks = nullptr);

// Originals each followed by `variants` independently noised copies; labels
// and actor ids inherited, variant numbered 1..variants.
std::vector<Snippet> augment_dataset(const std::vector<Snippet>& originals,
                                     std::uint32_t variants, const Rng& base,
                                     double fraction = 0.2,
                                     std::uint64_t* fallbacks = nullptr);

}  // namespace sprs
