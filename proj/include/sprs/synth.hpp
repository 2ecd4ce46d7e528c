#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sprs/image.hpp"
#include "sprs/preprocess.hpp"
#include "sprs/rng.hpp"

namespace sprs {

// Renders one 28x28 grayscale digit (0-9) from per-class stroke templates
// with random translation, scale, and rotation jitter.
GrayImage render_digit(std::uint32_t digit, Rng& rng);

// Balanced digit set: per_class images of each class 0-9, sample-major
// (digit index varies fastest). Deterministic per seed.
std::pair<std::vector<GrayImage>, std::vector<std::uint8_t>> gen_digit_dataset(
    std::uint32_t per_class, std::uint64_t seed);

struct SynthVideoParams {
    std::uint32_t classes = 10;
    std::uint32_t actors = 9;
    std::uint32_t frames = 10;
    std::uint32_t width = 42;
    std::uint32_t height = 60;
};

// Binary snippet corpus: each class pairs a thin line-drawn shape with a
// fixed motion direction/speed; actors vary start position, size, and speed
// slightly. Shapes translate and bounce off the frame walls.
std::vector<Snippet> gen_video_dataset(const SynthVideoParams& params, const Rng& base);

// On-disk layout: <dir>/snippet_NNN/{sidecar.json, frame_NN.pbm}.
void write_snippets(const std::vector<Snippet>& snippets, const std::string& dir);
std::vector<Snippet> read_snippets(const std::string& dir);

}  // namespace sprs
