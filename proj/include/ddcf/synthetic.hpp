#pragma once

// Synthetic sequences with exact ground truth: a translating square, a
// rotating bar and two blobs whose separation oscillates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "eval.hpp"
#include "image.hpp"
#include "spectral.hpp"

namespace ddcf {

enum class DemoKind { translate, rotate, articulate };

inline DemoKind parse_demo_kind(const std::string& s) {
    if (s == "translate")
        return DemoKind::translate;
    if (s == "rotate")
        return DemoKind::rotate;
    if (s == "articulate")
        return DemoKind::articulate;
    throw ArgumentError("unknown demo kind '" + s + "'");
}

struct DemoSequence {
    std::vector<Image> frames;
    std::vector<Box> groundtruth;
};

inline constexpr double kTextureCell = 4.0; // side of the square texture patches, pixels
inline constexpr double kBackgroundContrast = 0.2;

namespace detail {

// Portable uniform [0, 1) from the engine's raw output.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Texture {
    int cols = 0, rows = 0;
    double cell = 4.0;
    std::vector<std::array<float, 3>> colors;

    std::array<float, 3> at(double u, double v) const {
        const int i = std::clamp(static_cast<int>(std::floor(u / cell)), 0, cols - 1);
        const int j = std::clamp(static_cast<int>(std::floor(v / cell)), 0, rows - 1);
        return colors[static_cast<std::size_t>(j) * cols + i];
    }
};

inline Texture make_texture(std::mt19937_64& rng, double width, double height, double cell) {
    Texture t;
    t.cell = cell;
    t.cols = std::max(1, static_cast<int>(std::ceil(width / cell)));
    t.rows = std::max(1, static_cast<int>(std::ceil(height / cell)));
    for (int i = 0; i < t.cols * t.rows; ++i) {
        const bool bright = unit(rng) < 0.5;
        std::array<float, 3> c{};
        for (auto& ch : c)
            ch = static_cast<float>(bright ? 0.65 + 0.35 * unit(rng) : 0.05 + 0.3 * unit(rng));
        t.colors.push_back(c);
    }
    return t;
}

// Smooth low-contrast background: bilinear upsampling of a coarse random grid.
inline Image make_background(std::mt19937_64& rng, int width, int height) {
    const int step = 16;
    const int gw = width / step + 2, gh = height / step + 2;
    std::vector<std::array<float, 3>> coarse(static_cast<std::size_t>(gw) * gh);
    for (auto& c : coarse)
        for (auto& ch : c)
            ch = static_cast<float>(0.45 - 0.5 * kBackgroundContrast + kBackgroundContrast * unit(rng));
    Image img(width, height, 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double fx = static_cast<double>(x) / step, fy = static_cast<double>(y) / step;
            const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
            const double ax = fx - x0, ay = fy - y0;
            for (int ch = 0; ch < 3; ++ch) {
                const double v = (1 - ax) * (1 - ay) * coarse[static_cast<std::size_t>(y0) * gw + x0][ch] +
                                 ax * (1 - ay) * coarse[static_cast<std::size_t>(y0) * gw + x0 + 1][ch] +
                                 (1 - ax) * ay * coarse[static_cast<std::size_t>(y0 + 1) * gw + x0][ch] +
                                 ax * ay * coarse[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1][ch];
                img.at(x, y, ch) = static_cast<float>(v);
            }
        }
    return img;
}

// Renders with 4x4 supersampling; `inside(x, y, color)` reports coverage at a
// subpixel location and writes the object color.
template <class Inside>
void render_object(Image& img, Inside&& inside, int x0, int y0, int x1, int y1) {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, img.width);
    y1 = std::min(y1, img.height);
    constexpr int ss = 4;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            std::array<double, 3> acc{};
            int hits = 0;
            for (int sy = 0; sy < ss; ++sy)
                for (int sx = 0; sx < ss; ++sx) {
                    const double px = x + (sx + 0.5) / ss, py = y + (sy + 0.5) / ss;
                    std::array<float, 3> c{};
                    if (inside(px, py, c)) {
                        ++hits;
                        for (int ch = 0; ch < 3; ++ch)
                            acc[ch] += c[ch];
                    } else {
                        for (int ch = 0; ch < 3; ++ch)
                            acc[ch] += img.at(x, y, ch);
                    }
                }
            if (hits == 0)
                continue;
            for (int ch = 0; ch < 3; ++ch)
                img.at(x, y, ch) = static_cast<float>(acc[ch] / (ss * ss));
        }
}

} // namespace detail

inline constexpr double kTranslateSpeed = 2.0;      // pixels per frame
inline constexpr double kRotateDegreesPerFrame = 3.0;

// Tight axis-aligned box of a w x h rectangle rotated by angle about (cx, cy).
inline Box rotated_rect_bounds(double cx, double cy, double w, double h, double angle) {
    const double c = std::abs(std::cos(angle)), s = std::abs(std::sin(angle));
    const double hx = 0.5 * (c * w + s * h);
    const double hy = 0.5 * (s * w + c * h);
    return {cx - hx, cy - hy, 2.0 * hx, 2.0 * hy};
}

inline DemoSequence make_demo(DemoKind kind, int frames, std::uint64_t seed = 1) {
    if (frames < 1)
        throw ArgumentError("make_demo: frame count must be >= 1");
    std::mt19937_64 rng(seed);
    DemoSequence seq;

    switch (kind) {
    case DemoKind::translate: {
        const double side = 32.0;
        const double x_start = 40.0, y_top = 64.0;
        const int width = std::max(200, static_cast<int>(x_start + kTranslateSpeed * (frames - 1) + side + 40.0));
        const int height = 160;
        const Image bg = detail::make_background(rng, width, height);
        const detail::Texture tex = detail::make_texture(rng, side, side, kTextureCell);
        for (int f = 0; f < frames; ++f) {
            const double x = x_start + kTranslateSpeed * f;
            Image img = bg;
            detail::render_object(
                img,
                [&](double px, double py, std::array<float, 3>& c) {
                    if (px < x || px >= x + side || py < y_top || py >= y_top + side)
                        return false;
                    c = tex.at(px - x, py - y_top);
                    return true;
                },
                static_cast<int>(x), static_cast<int>(y_top), static_cast<int>(x + side) + 1,
                static_cast<int>(y_top + side) + 1);
            seq.frames.push_back(std::move(img));
            seq.groundtruth.push_back({x, y_top, side, side});
        }
        break;
    }
    case DemoKind::rotate: {
        const double bw = 60.0, bh = 16.0;
        const double cx = 100.0, cy = 80.0;
        const Image bg = detail::make_background(rng, 200, 160);
        const detail::Texture tex = detail::make_texture(rng, bw, bh, kTextureCell);
        for (int f = 0; f < frames; ++f) {
            const double angle = kRotateDegreesPerFrame * f * kPi / 180.0;
            const double ca = std::cos(angle), sa = std::sin(angle);
            Image img = bg;
            const Box box = rotated_rect_bounds(cx, cy, bw, bh, angle);
            detail::render_object(
                img,
                [&](double px, double py, std::array<float, 3>& c) {
                    const double dx = px - cx, dy = py - cy;
                    double u = ca * dx + sa * dy;  // bar-local coordinates
                    double v = -sa * dx + ca * dy;
                    if (std::abs(u) >= 0.5 * bw || std::abs(v) >= 0.5 * bh)
                        return false;
                    // point-symmetric texture, so the rotation center is the unique symmetry center
                    if (v < 0.0 || (v == 0.0 && u < 0.0)) {
                        u = -u;
                        v = -v;
                    }
                    c = tex.at(u + 0.5 * bw, v + 0.5 * bh);
                    return true;
                },
                static_cast<int>(std::floor(box.x)), static_cast<int>(std::floor(box.y)),
                static_cast<int>(std::ceil(box.x + box.w)) + 1, static_cast<int>(std::ceil(box.y + box.h)) + 1);
            seq.frames.push_back(std::move(img));
            seq.groundtruth.push_back(box);
        }
        break;
    }
    case DemoKind::articulate: {
        const double radius = 10.0;
        const double cx = 100.0, cy = 80.0;
        const Image bg = detail::make_background(rng, 200, 160);
        const detail::Texture left = detail::make_texture(rng, 2 * radius, 2 * radius, kTextureCell);
        const detail::Texture right = detail::make_texture(rng, 2 * radius, 2 * radius, kTextureCell);
        for (int f = 0; f < frames; ++f) {
            const double sep = 30.0 + 12.0 * std::sin(kTwoPi * f / 20.0);
            const double lx = cx - 0.5 * sep, rx = cx + 0.5 * sep;
            Image img = bg;
            auto blob = [&](double bx, const detail::Texture& tex) {
                detail::render_object(
                    img,
                    [&](double px, double py, std::array<float, 3>& c) {
                        const double dx = px - bx, dy = py - cy;
                        if (dx * dx + dy * dy >= radius * radius)
                            return false;
                        c = tex.at(dx + radius, dy + radius);
                        return true;
                    },
                    static_cast<int>(bx - radius) - 1, static_cast<int>(cy - radius) - 1,
                    static_cast<int>(bx + radius) + 2, static_cast<int>(cy + radius) + 2);
            };
            blob(lx, left);
            blob(rx, right);
            seq.frames.push_back(std::move(img));
            seq.groundtruth.push_back({lx - radius, cy - radius, sep + 2 * radius, 2 * radius});
        }
        break;
    }
    }
    return seq;
}

} // namespace ddcf
