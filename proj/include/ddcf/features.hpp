#pragma once

// Feature maps: per-cell grayscale, Color Names, and precomputed dense
// feature planes read from a simple binary container.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "image.hpp"
#include "types.hpp"

#ifndef DDCF_DEFAULT_ASSET_DIR
#define DDCF_DEFAULT_ASSET_DIR "assets"
#endif

namespace ddcf {

struct FeatureMap {
    std::vector<Grid> channels;
    Vec2 center;       // source region center, image pixels
    Vec2 extent;       // source region extent at scale 1, image pixels
    double scale = 1.0;

    int dims() const { return static_cast<int>(channels.size()); }
};

inline void validate(const FeatureMap& fm) {
    if (fm.channels.empty())
        throw DimensionError("FeatureMap: no channels");
    for (const Grid& g : fm.channels) {
        if (g.empty())
            throw DimensionError("FeatureMap: empty channel grid");
        for (double v : g.values)
            if (!std::isfinite(v))
                throw ArgumentError("FeatureMap: non-finite value");
    }
}

// Per-cell mean intensity shifted to [-0.5, 0.5].
inline FeatureMap grayscale_cells(const Image& patch, int cell_size) {
    if (cell_size < 1)
        throw ArgumentError("grayscale_cells: cell size must be >= 1");
    const int cx = patch.width / cell_size;
    const int cy = patch.height / cell_size;
    Grid g(cx, cy);
    const double inv = 1.0 / (static_cast<double>(cell_size) * cell_size);
    for (int j = 0; j < cy; ++j)
        for (int i = 0; i < cx; ++i) {
            double acc = 0.0;
            for (int y = j * cell_size; y < (j + 1) * cell_size; ++y)
                for (int x = i * cell_size; x < (i + 1) * cell_size; ++x)
                    acc += luminance(patch, x, y);
            g(i, j) = acc * inv - 0.5;
        }
    FeatureMap fm;
    fm.channels.push_back(std::move(g));
    return fm;
}

// 32768 x 10 lookup from 5-bit quantized RGB to color-name probabilities.
class ColorNamesTable {
  public:
    static constexpr int kEntries = 32768;
    static constexpr int kDims = 10;
    static constexpr const char* kFileName = "colornames_w10.bin";

    explicit ColorNamesTable(std::vector<float> values) : values_(std::move(values)) {
        if (values_.size() != static_cast<std::size_t>(kEntries) * kDims)
            throw FormatError("ColorNamesTable: expected " + std::to_string(kEntries * kDims) + " values, got " +
                              std::to_string(values_.size()));
    }

    static ColorNamesTable load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigurationError("Color Names table not found: " + path.string());
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const std::size_t expected = static_cast<std::size_t>(kEntries) * kDims * 4;
        if (bytes.size() != expected)
            throw FormatError("Color Names table " + path.string() + ": expected " + std::to_string(expected) +
                              " bytes, got " + std::to_string(bytes.size()));
        std::vector<float> values(static_cast<std::size_t>(kEntries) * kDims);
        for (std::size_t i = 0; i < values.size(); ++i) {
            const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                                    (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                                    (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                                    (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
            std::memcpy(&values[i], &u, 4);
        }
        return ColorNamesTable(std::move(values));
    }

    static int index(int r8, int g8, int b8) { return ((r8 >> 3) << 10) | ((g8 >> 3) << 5) | (b8 >> 3); }

    const float* row(int idx) const { return values_.data() + static_cast<std::size_t>(idx) * kDims; }
    const float* lookup(int r8, int g8, int b8) const { return row(index(r8, g8, b8)); }
    const std::vector<float>& values() const { return values_; }

  private:
    std::vector<float> values_;
};

// DEFORM_DCF_ASSETS overrides the compiled-in asset directory.
inline std::filesystem::path asset_directory() {
    if (const char* env = std::getenv("DEFORM_DCF_ASSETS"); env && *env)
        return env;
    return DDCF_DEFAULT_ASSET_DIR;
}

inline std::filesystem::path colornames_asset_path() { return asset_directory() / ColorNamesTable::kFileName; }

inline int to_byte(float v) { return static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

// Cell means of per-pixel Color Names probabilities, before centering.
inline FeatureMap colornames_raw(const Image& patch, int cell_size, const ColorNamesTable& table) {
    if (patch.channels < 3)
        throw ArgumentError("colornames: RGB patch required");
    if (cell_size < 1)
        throw ArgumentError("colornames: cell size must be >= 1");
    const int cx = patch.width / cell_size;
    const int cy = patch.height / cell_size;
    FeatureMap fm;
    fm.channels.assign(ColorNamesTable::kDims, Grid(cx, cy));
    const double inv = 1.0 / (static_cast<double>(cell_size) * cell_size);
    for (int j = 0; j < cy; ++j)
        for (int i = 0; i < cx; ++i) {
            std::array<double, ColorNamesTable::kDims> acc{};
            for (int y = j * cell_size; y < (j + 1) * cell_size; ++y)
                for (int x = i * cell_size; x < (i + 1) * cell_size; ++x) {
                    const float* p = table.lookup(to_byte(patch.at(x, y, 0)), to_byte(patch.at(x, y, 1)),
                                                  to_byte(patch.at(x, y, 2)));
                    for (int d = 0; d < ColorNamesTable::kDims; ++d)
                        acc[d] += p[d];
                }
            for (int d = 0; d < ColorNamesTable::kDims; ++d)
                fm.channels[d](i, j) = acc[d] * inv;
        }
    return fm;
}

inline void mean_center(FeatureMap& fm) {
    for (Grid& g : fm.channels) {
        double mean = 0.0;
        for (double v : g.values)
            mean += v;
        mean /= static_cast<double>(g.values.size());
        for (double& v : g.values)
            v -= mean;
    }
}

// Color Names channels, each mean-centered over the patch.
inline FeatureMap colornames(const Image& patch, int cell_size, const ColorNamesTable& table) {
    FeatureMap fm = colornames_raw(patch, cell_size, table);
    mean_center(fm);
    return fm;
}

// ---------------------------------------------------------------------------
// Precomputed feature container:
//   "DFF1", u32 frame_count, u32 H, u32 W, u32 D  (little endian)
//   frame_count * H * W * D float32, frame-major, row-major, channel-last.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::string& out, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(out, u);
}

inline float get_f32(const unsigned char* p) {
    const std::uint32_t u = get_u32(p);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

} // namespace detail

struct PrecomputedHeader {
    std::uint32_t frames = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t dims = 0;
};

inline constexpr std::size_t kPrecomputedHeaderBytes = 20;

// Parses an in-memory container; every frame shares H, W and D.
class PrecomputedFeatures {
  public:
    static PrecomputedFeatures parse(std::vector<unsigned char> bytes) {
        if (bytes.size() < 4)
            throw FormatError("precomputed features: truncated magic at byte offset " + std::to_string(bytes.size()));
        if (std::memcmp(bytes.data(), "DFF1", 4) != 0)
            throw FormatError("precomputed features: bad magic at byte offset 0");
        if (bytes.size() < kPrecomputedHeaderBytes)
            throw FormatError("precomputed features: truncated header at byte offset " + std::to_string(bytes.size()) +
                              ", expected " + std::to_string(kPrecomputedHeaderBytes) + " bytes");
        PrecomputedHeader h;
        h.frames = detail::get_u32(bytes.data() + 4);
        h.height = detail::get_u32(bytes.data() + 8);
        h.width = detail::get_u32(bytes.data() + 12);
        h.dims = detail::get_u32(bytes.data() + 16);
        const std::size_t expected = kPrecomputedHeaderBytes + static_cast<std::size_t>(h.frames) * h.height * h.width * h.dims * 4;
        if (bytes.size() != expected)
            throw FormatError("precomputed features: expected " + std::to_string(expected) + " bytes, got " +
                              std::to_string(bytes.size()) + " (payload ends at byte offset " +
                              std::to_string(bytes.size()) + ")");
        PrecomputedFeatures out;
        out.header_ = h;
        out.bytes_ = std::move(bytes);
        return out;
    }

    static PrecomputedFeatures load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigurationError("precomputed features: cannot open " + path.string());
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse(std::move(bytes));
    }

    const PrecomputedHeader& header() const { return header_; }
    std::size_t frame_count() const { return header_.frames; }

    FeatureMap frame(std::size_t index) const {
        if (index >= header_.frames)
            throw std::out_of_range("precomputed features: frame " + std::to_string(index) + " out of range (" +
                                    std::to_string(header_.frames) + " frames)");
        const int H = static_cast<int>(header_.height), W = static_cast<int>(header_.width);
        const int D = static_cast<int>(header_.dims);
        FeatureMap fm;
        fm.channels.assign(static_cast<std::size_t>(D), Grid(W, H));
        const unsigned char* p =
            bytes_.data() + kPrecomputedHeaderBytes + index * static_cast<std::size_t>(H) * W * D * 4;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int d = 0; d < D; ++d, p += 4)
                    fm.channels[d](x, y) = detail::get_f32(p);
        return fm;
    }

    // Dense feature plane of one frame as a multi-channel image.
    Image frame_image(std::size_t index) const {
        const FeatureMap fm = frame(index);
        Image img(static_cast<int>(header_.width), static_cast<int>(header_.height), static_cast<int>(header_.dims));
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int d = 0; d < img.channels; ++d)
                    img.at(x, y, d) = static_cast<float>(fm.channels[d](x, y));
        return img;
    }

  private:
    PrecomputedHeader header_;
    std::vector<unsigned char> bytes_;
};

inline FeatureMap load_precomputed(const std::filesystem::path& path, std::size_t frame_index) {
    return PrecomputedFeatures::load(path).frame(frame_index);
}

inline std::string encode_precomputed(const std::vector<FeatureMap>& frames) {
    if (frames.empty())
        throw ArgumentError("encode_precomputed: no frames");
    const int D = frames.front().dims();
    if (D < 1)
        throw DimensionError("encode_precomputed: no channels");
    const int H = frames.front().channels.front().height;
    const int W = frames.front().channels.front().width;
    for (const FeatureMap& fm : frames) {
        if (fm.dims() != D)
            throw DimensionError("encode_precomputed: channel count differs between frames");
        for (const Grid& g : fm.channels)
            if (g.width != W || g.height != H)
                throw DimensionError("encode_precomputed: resolution differs between channels or frames");
    }
    std::string out = "DFF1";
    detail::put_u32(out, static_cast<std::uint32_t>(frames.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(H));
    detail::put_u32(out, static_cast<std::uint32_t>(W));
    detail::put_u32(out, static_cast<std::uint32_t>(D));
    for (const FeatureMap& fm : frames)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int d = 0; d < D; ++d)
                    detail::put_f32(out, static_cast<float>(fm.channels[d](x, y)));
    return out;
}

inline void save_precomputed(const std::filesystem::path& path, const std::vector<FeatureMap>& frames) {
    const std::string bytes = encode_precomputed(frames);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigurationError("save_precomputed: cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------

struct FeatureConfig {
    bool grayscale = true;
    bool colornames = false;
    bool precomputed = false;
    int cell_size = 4;
    double padding = 4.0; // sample area relative to target area

    void validate() const {
        if (cell_size < 1)
            throw ArgumentError("FeatureConfig: cell size must be >= 1");
        if (!(padding >= 1.0))
            throw ArgumentError("FeatureConfig: padding factor must be >= 1");
        if (!grayscale && !colornames && !precomputed)
            throw ArgumentError("FeatureConfig: no feature type selected");
    }

    // Parses "grayscale", "colornames", "precomputed" joined by '+' or ','.
    static FeatureConfig from_selector(const std::string& selector) {
        FeatureConfig cfg;
        cfg.grayscale = cfg.colornames = cfg.precomputed = false;
        std::string token;
        std::istringstream in(selector);
        while (std::getline(in, token, '+')) {
            std::istringstream parts(token);
            std::string name;
            while (std::getline(parts, name, ',')) {
                if (name == "grayscale")
                    cfg.grayscale = true;
                else if (name == "colornames")
                    cfg.colornames = true;
                else if (name == "precomputed")
                    cfg.precomputed = true;
                else
                    throw ArgumentError("unknown feature type '" + name + "'");
            }
        }
        cfg.validate();
        return cfg;
    }

    std::string selector() const {
        std::string s;
        auto add = [&](const char* n) { s += (s.empty() ? "" : "+") + std::string(n); };
        if (grayscale)
            add("grayscale");
        if (colornames)
            add("colornames");
        if (precomputed)
            add("precomputed");
        return s;
    }
};

// Extracts the configured channel stack for one sample region. Frames are
// RGB or grayscale images; precomputed planes are dense per-frame feature
// images covering the whole frame.
class FeatureExtractor {
  public:
    explicit FeatureExtractor(FeatureConfig config, std::shared_ptr<const ColorNamesTable> table = nullptr,
                              std::shared_ptr<const PrecomputedFeatures> precomputed = nullptr)
        : config_(config), table_(std::move(table)), precomputed_(std::move(precomputed)) {
        config_.validate();
        if (config_.colornames && !table_)
            throw ConfigurationError("colornames features requested without a Color Names table");
        if (config_.precomputed && !precomputed_)
            throw ConfigurationError("precomputed features requested without a feature file");
    }

    const FeatureConfig& config() const { return config_; }

    // cells_x x cells_y cells over the region size*scale around center.
    FeatureMap extract(const Image& frame, std::size_t frame_index, Vec2 center, Vec2 size, double scale, int cells_x,
                       int cells_y) const {
        FeatureMap out;
        const int cs = config_.cell_size;
        if (config_.grayscale || config_.colornames) {
            const Image patch = extract_patch(frame, center, size, scale, cells_x * cs, cells_y * cs);
            if (config_.grayscale)
                append(out, grayscale_cells(patch, cs));
            if (config_.colornames) {
                if (patch.channels >= 3) {
                    append(out, colornames(patch, cs, *table_));
                } else {
                    Image rgb(patch.width, patch.height, 3);
                    for (int y = 0; y < patch.height; ++y)
                        for (int x = 0; x < patch.width; ++x)
                            for (int c = 0; c < 3; ++c)
                                rgb.at(x, y, c) = patch.at(x, y, 0);
                    append(out, colornames(rgb, cs, *table_));
                }
            }
        }
        if (config_.precomputed) {
            const Image plane = precomputed_->frame_image(frame_index);
            // Map frame-pixel geometry onto the feature plane's grid.
            const double sx = static_cast<double>(plane.width) / frame.width;
            const double sy = static_cast<double>(plane.height) / frame.height;
            const Image cells = extract_patch(plane, {center.x * sx, center.y * sy}, {size.x * sx, size.y * sy}, scale,
                                              cells_x, cells_y);
            FeatureMap fm;
            fm.channels.assign(static_cast<std::size_t>(plane.channels), Grid(cells_x, cells_y));
            for (int y = 0; y < cells_y; ++y)
                for (int x = 0; x < cells_x; ++x)
                    for (int d = 0; d < plane.channels; ++d)
                        fm.channels[d](x, y) = cells.at(x, y, d);
            append(out, std::move(fm));
        }
        out.center = center;
        out.extent = size;
        out.scale = scale;
        return out;
    }

  private:
    static void append(FeatureMap& dst, FeatureMap src) {
        for (Grid& g : src.channels)
            dst.channels.push_back(std::move(g));
    }

    FeatureConfig config_;
    std::shared_ptr<const ColorNamesTable> table_;
    std::shared_ptr<const PrecomputedFeatures> precomputed_;
};

} // namespace ddcf
