#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "types.hpp"

namespace ddcf {

// Interleaved float image. Raster imagery is stored in [0, 1]; dense feature
// planes use the same container with arbitrary channel counts and values.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.0f) : width(w), height(h), channels(c) {
        if (w < 0 || h < 0 || c < 0)
            throw DimensionError("Image: negative extent");
        data.assign(static_cast<std::size_t>(w) * h * c, fill);
    }

    bool empty() const { return width == 0 || height == 0 || channels == 0; }

    float& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

// Bilinear sample at continuous pixel coordinates (pixel x covers [x, x+1)),
// replicating edge pixels outside the image.
inline float sample_bilinear(const Image& img, double u, double v, int c) {
    const double fx = u - 0.5;
    const double fy = v - 0.5;
    const double x0f = std::floor(fx);
    const double y0f = std::floor(fy);
    const double ax = fx - x0f;
    const double ay = fy - y0f;
    auto clamp_x = [&](double x) { return static_cast<int>(std::clamp(x, 0.0, img.width - 1.0)); };
    auto clamp_y = [&](double y) { return static_cast<int>(std::clamp(y, 0.0, img.height - 1.0)); };
    const int x0 = clamp_x(x0f), x1 = clamp_x(x0f + 1.0);
    const int y0 = clamp_y(y0f), y1 = clamp_y(y0f + 1.0);
    const double top = (1.0 - ax) * img.at(x0, y0, c) + ax * img.at(x1, y0, c);
    const double bottom = (1.0 - ax) * img.at(x0, y1, c) + ax * img.at(x1, y1, c);
    return static_cast<float>((1.0 - ay) * top + ay * bottom);
}

// Resamples the region of extent size*scale around center to an
// out_width x out_height patch.
inline Image extract_patch(const Image& image, Vec2 center, Vec2 size, double scale, int out_width, int out_height) {
    if (image.empty())
        throw ArgumentError("extract_patch: empty image");
    if (!(size.x > 0.0) || !(size.y > 0.0))
        throw ArgumentError("extract_patch: region size must be positive");
    if (!(scale > 0.0))
        throw ArgumentError("extract_patch: scale must be positive");
    if (out_width < 1 || out_height < 1)
        throw ArgumentError("extract_patch: output resolution must be positive");

    Image patch(out_width, out_height, image.channels);
    const double step_x = size.x * scale / out_width;
    const double step_y = size.y * scale / out_height;
    for (int j = 0; j < out_height; ++j) {
        const double v = center.y + (j + 0.5 - 0.5 * out_height) * step_y;
        for (int i = 0; i < out_width; ++i) {
            const double u = center.x + (i + 0.5 - 0.5 * out_width) * step_x;
            for (int c = 0; c < image.channels; ++c)
                patch.at(i, j, c) = sample_bilinear(image, u, v, c);
        }
    }
    return patch;
}

inline float luminance(const Image& img, int x, int y) {
    if (img.channels >= 3)
        return 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) + 0.114f * img.at(x, y, 2);
    return img.at(x, y, 0);
}

} // namespace ddcf
