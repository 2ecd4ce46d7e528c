#include "sprs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sprs/error.hpp"

namespace sprs {

namespace {

struct Pt {
    double x, y;
};

// Stroke templates on the unit square (x right, y down); each inner vector
// is one polyline.
const std::vector<std::vector<Pt>>& digit_strokes(std::uint32_t digit) {
    static const std::vector<std::vector<std::vector<Pt>>> all = {
        // 0: oval outline
        {{{0.50, 0.08}, {0.22, 0.25}, {0.18, 0.55}, {0.30, 0.86}, {0.52, 0.92}, {0.75, 0.80},
          {0.82, 0.48}, {0.72, 0.16}, {0.50, 0.08}}},
        // 1: stem with a flag
        {{{0.35, 0.26}, {0.54, 0.08}, {0.54, 0.92}}},
        // 2
        {{{0.22, 0.28}, {0.32, 0.10}, {0.66, 0.10}, {0.78, 0.30}, {0.24, 0.88}, {0.80, 0.88}}},
        // 3
        {{{0.22, 0.14}, {0.68, 0.12}, {0.78, 0.30}, {0.50, 0.48}, {0.78, 0.68}, {0.68, 0.88},
          {0.22, 0.86}}},
        // 4
        {{{0.66, 0.92}, {0.66, 0.08}, {0.16, 0.62}, {0.86, 0.62}}},
        // 5
        {{{0.78, 0.10}, {0.26, 0.10}, {0.23, 0.46}, {0.62, 0.44}, {0.80, 0.64}, {0.66, 0.90},
          {0.22, 0.88}}},
        // 6
        {{{0.70, 0.10}, {0.38, 0.28}, {0.24, 0.60}, {0.34, 0.88}, {0.66, 0.88}, {0.76, 0.64},
          {0.52, 0.52}, {0.28, 0.58}}},
        // 7
        {{{0.18, 0.12}, {0.82, 0.12}, {0.44, 0.90}}},
        // 8: two stacked loops
        {{{0.50, 0.10}, {0.30, 0.20}, {0.32, 0.38}, {0.50, 0.48}, {0.68, 0.38}, {0.70, 0.20},
          {0.50, 0.10}},
         {{0.50, 0.48}, {0.27, 0.60}, {0.28, 0.82}, {0.50, 0.92}, {0.72, 0.82}, {0.73, 0.60},
          {0.50, 0.48}}},
        // 9: loop with a tail
        {{{0.78, 0.32}, {0.58, 0.12}, {0.36, 0.20}, {0.34, 0.42}, {0.56, 0.52}, {0.78, 0.40}},
         {{0.78, 0.32}, {0.62, 0.90}}},
    };
    return all.at(digit);
}

void stamp_disk(GrayImage& img, double x, double y, double radius) {
    const int r0 = std::max(0, static_cast<int>(std::floor(y - radius)));
    const int r1 = std::min<int>(img.height - 1, static_cast<int>(std::ceil(y + radius)));
    const int c0 = std::max(0, static_cast<int>(std::floor(x - radius)));
    const int c1 = std::min<int>(img.width - 1, static_cast<int>(std::ceil(x + radius)));
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c)
            if (std::hypot(c - x, r - y) <= radius) img.at(r, c) = 255;
}

}  // namespace

GrayImage render_digit(std::uint32_t digit, Rng& rng) {
    if (digit > 9) throw ConfigError("render_digit: digit must be 0-9");
    GrayImage img(28, 28);

    const double scale = 0.85 + 0.30 * rng.real();
    const double theta = -0.15 + 0.30 * rng.real();
    const double dx = -1.5 + 3.0 * rng.real();
    const double dy = -1.5 + 3.0 * rng.real();
    const double ct = std::cos(theta), st = std::sin(theta);
    const auto map = [&](const Pt& p) -> Pt {
        // Unit square -> ~22px glyph box, rotated and jittered about center.
        const double gx = (p.x - 0.5) * 20.0 * scale;
        const double gy = (p.y - 0.5) * 22.0 * scale;
        return {14.0 + ct * gx - st * gy + dx, 14.0 + st * gx + ct * gy + dy};
    };

    for (const auto& stroke : digit_strokes(digit)) {
        for (std::size_t i = 0; i + 1 < stroke.size(); ++i) {
            const Pt a = map(stroke[i]);
            const Pt b = map(stroke[i + 1]);
            const double len = std::hypot(b.x - a.x, b.y - a.y);
            const int steps = std::max(1, static_cast<int>(len / 0.3));
            for (int s = 0; s <= steps; ++s) {
                const double u = static_cast<double>(s) / steps;
                stamp_disk(img, a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), 1.4);
            }
        }
    }
    return img;
}

std::pair<std::vector<GrayImage>, std::vector<std::uint8_t>> gen_digit_dataset(
    std::uint32_t per_class, std::uint64_t seed) {
    if (per_class == 0) throw ConfigError("gen_digit_dataset: per_class must be positive");
    std::vector<GrayImage> images;
    std::vector<std::uint8_t> labels;
    images.reserve(per_class * 10u);
    const Rng base(seed);
    for (std::uint32_t i = 0; i < per_class; ++i) {
        for (std::uint32_t digit = 0; digit < 10; ++digit) {
            Rng rng = base.derive({digit, i});
            images.push_back(render_digit(digit, rng));
            labels.push_back(static_cast<std::uint8_t>(digit));
        }
    }
    return {std::move(images), std::move(labels)};
}

namespace {

// Thin line shapes on the unit square, one per class.
const std::vector<std::vector<Pt>>& class_shape(std::uint32_t cls) {
    static const std::vector<std::vector<std::vector<Pt>>> all = {
        {{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}}},                  // box
        {{{0.5, 0}, {0.5, 1}}},                                      // vertical bar
        {{{0, 0.5}, {1, 0.5}}},                                      // horizontal bar
        {{{0, 0}, {1, 1}}},                                          // diagonal
        {{{0, 0}, {1, 1}}, {{1, 0}, {0, 1}}},                        // X
        {{{0.5, 0}, {0.5, 1}}, {{0, 0.5}, {1, 0.5}}},                // plus
        {{{0.15, 0}, {0.15, 1}, {1, 1}}},                            // L
        {{{0, 0}, {1, 0}}, {{0.5, 0}, {0.5, 1}}},                    // T
        {{{0, 0}, {0.5, 1}, {1, 0}}},                                // V
        {{{0, 0}, {1, 0}, {0, 1}, {1, 1}}},                          // Z
    };
    return all.at(cls);
}

void draw_line(BinaryFrame& f, double x0, double y0, double x1, double y1) {
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int steps = std::max(1, static_cast<int>(len / 0.25));
    for (int s = 0; s <= steps; ++s) {
        const double u = static_cast<double>(s) / steps;
        const auto c = static_cast<std::int64_t>(std::lround(x0 + u * (x1 - x0)));
        const auto r = static_cast<std::int64_t>(std::lround(y0 + u * (y1 - y0)));
        if (r >= 0 && c >= 0 && r < f.height && c < f.width)
            f.put(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c), true);
    }
}

}  // namespace

std::vector<Snippet> gen_video_dataset(const SynthVideoParams& params, const Rng& base) {
    if (params.classes == 0 || params.actors == 0 || params.frames == 0)
        throw ConfigError("gen_video_dataset: counts must be positive");
    if (params.width < 24 || params.height < 24)
        throw ConfigError("gen_video_dataset: frame dims too small");

    std::vector<Snippet> out;
    out.reserve(static_cast<std::size_t>(params.classes) * params.actors);
    for (std::uint32_t cls = 0; cls < params.classes; ++cls) {
        // Class motion signature: a fixed direction and speed.
        const double angle = (0.5 + cls) * 2.0 * 3.14159265358979323846 / params.classes;
        const double class_speed = 2.0 + 0.3 * (cls % 4);
        for (std::uint32_t actor = 0; actor < params.actors; ++actor) {
            Rng rng = base.derive({cls, actor});
            const double size = 12.0 + 3.5 * rng.real();             // shape box in px
            const double speed = class_speed * (0.95 + 0.1 * rng.real());
            double vx = speed * std::cos(angle);
            double vy = speed * std::sin(angle);
            double x = (params.width - size) * (0.42 + 0.16 * rng.real());
            double y = (params.height - size) * (0.42 + 0.16 * rng.real());

            Snippet snip;
            snip.class_label = cls;
            snip.actor_id = actor;
            snip.variant = 0;
            for (std::uint32_t t = 0; t < params.frames; ++t) {
                BinaryFrame frame(params.width, params.height);
                for (const auto& stroke : class_shape(cls % 10))
                    for (std::size_t i = 0; i + 1 < stroke.size(); ++i)
                        draw_line(frame, x + stroke[i].x * size, y + stroke[i].y * size,
                                  x + stroke[i + 1].x * size, y + stroke[i + 1].y * size);
                snip.frames.push_back(std::move(frame));

                x += vx;
                y += vy;
                if (x < 1.0) { x = 1.0; vx = -vx; }
                if (y < 1.0) { y = 1.0; vy = -vy; }
                if (x + size > params.width - 1.0) { x = params.width - 1.0 - size; vx = -vx; }
                if (y + size > params.height - 1.0) { y = params.height - 1.0 - size; vy = -vy; }
            }
            out.push_back(std::move(snip));
        }
    }
    return out;
}

void write_snippets(const std::vector<Snippet>& snippets, const std::string& dir) {
    namespace fs = std::filesystem;
    if (snippets.empty()) throw EmptyInputError("write_snippets: nothing to write");
    fs::create_directories(dir);
    char name[64];
    for (std::size_t i = 0; i < snippets.size(); ++i) {
        const Snippet& s = snippets[i];
        std::snprintf(name, sizeof name, "snippet_%03zu", i);
        const fs::path sdir = fs::path(dir) / name;
        fs::create_directories(sdir);

        nlohmann::json sidecar;
        sidecar["class_label"] = s.class_label;
        sidecar["actor_id"] = s.actor_id;
        sidecar["variant"] = s.variant;
        std::vector<std::string> frame_names;
        for (std::size_t f = 0; f < s.frames.size(); ++f) {
            std::snprintf(name, sizeof name, "frame_%02zu.pbm", f);
            write_pbm(s.frames[f], (sdir / name).string());
            frame_names.emplace_back(name);
        }
        sidecar["frames"] = frame_names;
        std::ofstream out(sdir / "sidecar.json");
        if (!out) throw DataError("write_snippets: cannot write sidecar in " + sdir.string());
        out << sidecar.dump(2) << "\n";
    }
}

std::vector<Snippet> read_snippets(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("read_snippets: not a directory: " + dir);
    std::vector<fs::path> sidecars;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() == "sidecar.json")
            sidecars.push_back(entry.path());
    std::sort(sidecars.begin(), sidecars.end());
    if (sidecars.empty()) throw DataError("read_snippets: no sidecar.json under " + dir);

    std::vector<Snippet> out;
    out.reserve(sidecars.size());
    for (const fs::path& sc : sidecars) {
        std::ifstream in(sc);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("read_snippets: malformed sidecar " + sc.string() + ": " + e.what());
        }
        try {
            Snippet s;
            s.class_label = j.at("class_label").get<std::uint32_t>();
            s.actor_id = j.at("actor_id").get<std::uint32_t>();
            s.variant = j.value("variant", 0u);
            for (const auto& fn : j.at("frames"))
                s.frames.push_back(read_pbm((sc.parent_path() / fn.get<std::string>()).string()));
            if (s.frames.empty()) throw DataError("snippet has no frames");
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("read_snippets: malformed sidecar " + sc.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace sprs
