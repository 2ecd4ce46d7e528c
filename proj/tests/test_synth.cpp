#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

#include "sprs/error.hpp"
#include "sprs/preprocess.hpp"
#include "sprs/synth.hpp"

using namespace sprs;

namespace {

BinaryFrame dilate2(const BinaryFrame& f) {
    BinaryFrame out(f.width, f.height);
    for (std::uint32_t r = 0; r < f.height; ++r)
        for (std::uint32_t c = 0; c < f.width; ++c) {
            if (!f.get(r, c)) continue;
            for (int dr = -2; dr <= 2; ++dr)
                for (int dc = -2; dc <= 2; ++dc) {
                    const std::int64_t nr = static_cast<std::int64_t>(r) + dr;
                    const std::int64_t nc = static_cast<std::int64_t>(c) + dc;
                    if (nr >= 0 && nc >= 0 && nr < f.height && nc < f.width)
                        out.put(static_cast<std::uint32_t>(nr), static_cast<std::uint32_t>(nc),
                                true);
                }
        }
    return out;
}

// Jaccard overlap after radius-2 dilation (thin strokes rarely coincide
// pixel-for-pixel; coarse spatial agreement is what separates classes).
double frame_overlap(const BinaryFrame& a, const BinaryFrame& b) {
    const BinaryFrame da = dilate2(a), db = dilate2(b);
    std::uint32_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < da.bits.size(); ++i) {
        inter += da.bits[i] & db.bits[i];
        uni += da.bits[i] | db.bits[i];
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

}  // namespace

TEST_CASE("digit renderer emits usable 28x28 glyphs") {
    Rng rng(42);
    for (std::uint32_t digit = 0; digit < 10; ++digit) {
        GrayImage img = render_digit(digit, rng);
        CHECK(img.width == 28);
        CHECK(img.height == 28);
        std::uint32_t lit = 0;
        for (std::uint8_t p : img.pixels) lit += p > 0;
        CHECK(lit > 40);             // strokes cover a real area
        CHECK(lit < 28 * 28 / 2);    // but stay sparse

        // Survives the digit preprocessing pipeline.
        const DigitFrame out = preprocess_mnist(img);
        CHECK_FALSE(out.empty);
        CHECK(out.frame.count_ones() >= 10);
    }
    CHECK_THROWS_AS(render_digit(10, rng), ConfigError);
}

TEST_CASE("digit dataset is balanced and deterministic") {
    const auto [images, labels] = gen_digit_dataset(7, 99);
    REQUIRE(images.size() == 70);
    REQUIRE(labels.size() == 70);
    std::vector<int> counts(10, 0);
    for (std::uint8_t l : labels) counts[l] += 1;
    for (int c : counts) CHECK(c == 7);

    const auto [again, _] = gen_digit_dataset(7, 99);
    for (std::size_t i = 0; i < images.size(); ++i) CHECK(images[i].pixels == again[i].pixels);

    const auto [other, other_labels] = gen_digit_dataset(7, 100);
    (void)other_labels;
    bool all_same = true;
    for (std::size_t i = 0; i < images.size(); ++i)
        all_same = all_same && images[i].pixels == other[i].pixels;
    CHECK_FALSE(all_same);

    CHECK_THROWS_AS(gen_digit_dataset(0, 1), ConfigError);
}

TEST_CASE("video dataset meets the count contract") {
    // 10 classes x 9 actors x 10 frames at 42x60.
    SynthVideoParams params;
    const std::vector<Snippet> snippets = gen_video_dataset(params, Rng(7));
    REQUIRE(snippets.size() == 90);
    for (const Snippet& s : snippets) {
        CHECK(s.frames.size() == 10);
        CHECK(s.variant == 0);
        CHECK(s.class_label < 10);
        CHECK(s.actor_id < 9);
        for (const BinaryFrame& f : s.frames) {
            CHECK(f.width == 42);
            CHECK(f.height == 60);
            CHECK(f.count_ones() >= 10);  // the shape is actually drawn
        }
    }
    // Every (class, actor) pair appears exactly once.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const Snippet& s : snippets) seen.emplace_back(s.class_label, s.actor_id);
    std::sort(seen.begin(), seen.end());
    CHECK(std::unique(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("video frames move over time and differ across classes") {
    // overlap statistics: frames within one snippet overlap more
    // with their own class's other actors than with other classes.
    SynthVideoParams params;
    const std::vector<Snippet> snippets = gen_video_dataset(params, Rng(7));
    const auto at = [&](std::uint32_t cls, std::uint32_t actor) -> const Snippet& {
        return snippets[cls * params.actors + actor];
    };

    // Motion: consecutive frames differ.
    for (const Snippet& s : snippets) {
        bool any_change = false;
        for (std::size_t f = 0; f + 1 < s.frames.size(); ++f)
            any_change = any_change || !(s.frames[f] == s.frames[f + 1]);
        CHECK(any_change);
    }

    double within = 0.0, across = 0.0;
    int within_n = 0, across_n = 0;
    for (std::uint32_t c1 = 0; c1 < 10; ++c1) {
        for (std::uint32_t c2 = 0; c2 < 10; ++c2) {
            for (std::uint32_t f = 0; f < params.frames; f += 3) {
                const double o = frame_overlap(at(c1, 0).frames[f], at(c2, 1).frames[f]);
                if (c1 == c2) {
                    within += o;
                    ++within_n;
                } else {
                    across += o;
                    ++across_n;
                }
            }
        }
    }
    CHECK(within / within_n > across / across_n);
}

TEST_CASE("video dataset is deterministic per seed") {
    SynthVideoParams params;
    params.classes = 4;
    params.actors = 3;
    params.frames = 5;
    const std::vector<Snippet> a = gen_video_dataset(params, Rng(31));
    const std::vector<Snippet> b = gen_video_dataset(params, Rng(31));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t f = 0; f < a[i].frames.size(); ++f)
            CHECK(a[i].frames[f] == b[i].frames[f]);

    CHECK_THROWS_AS(gen_video_dataset({0, 9, 10, 42, 60}, Rng(1)), ConfigError);
    CHECK_THROWS_AS(gen_video_dataset({10, 9, 10, 8, 8}, Rng(1)), ConfigError);
}

TEST_CASE("snippets round-trip through the on-disk layout") {
    namespace fs = std::filesystem;
    SynthVideoParams params;
    params.classes = 3;
    params.actors = 2;
    params.frames = 4;
    const std::vector<Snippet> snippets = gen_video_dataset(params, Rng(5));

    const std::string dir = "synth_snippets_test";
    fs::remove_all(dir);
    write_snippets(snippets, dir);
    CHECK(fs::exists(fs::path(dir) / "snippet_000" / "sidecar.json"));
    CHECK(fs::exists(fs::path(dir) / "snippet_005" / "frame_03.pbm"));

    const std::vector<Snippet> back = read_snippets(dir);
    REQUIRE(back.size() == snippets.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].class_label == snippets[i].class_label);
        CHECK(back[i].actor_id == snippets[i].actor_id);
        CHECK(back[i].variant == snippets[i].variant);
        REQUIRE(back[i].frames.size() == snippets[i].frames.size());
        for (std::size_t f = 0; f < back[i].frames.size(); ++f)
            CHECK(back[i].frames[f] == snippets[i].frames[f]);
    }

    // Malformed sidecar is reported as a data error.
    {
        std::ofstream bad(fs::path(dir) / "snippet_000" / "sidecar.json");
        bad << "{ not json";
    }
    CHECK_THROWS_AS(read_snippets(dir), DataError);
    fs::remove_all(dir);
    CHECK_THROWS_AS(read_snippets(dir), DataError);
}
