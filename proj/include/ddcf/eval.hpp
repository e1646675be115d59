#pragma once

// Overlap-based tracking evaluation: IoU, overlap precision and the success
// curve with its area under the curve.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace ddcf {

struct Box {
    double x = 0.0; // top-left, pixels
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
    friend bool operator==(const Box&, const Box&) = default;
};

inline double iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// Fraction of frames with IoU strictly above threshold.
inline double overlap_precision(std::span<const double> ious, double threshold) {
    if (ious.empty())
        throw ArgumentError("overlap_precision: empty IoU list");
    const auto hits = std::count_if(ious.begin(), ious.end(), [&](double v) { return v > threshold; });
    return static_cast<double>(hits) / static_cast<double>(ious.size());
}

struct SuccessCurve {
    std::vector<double> thresholds;
    std::vector<double> op_values;
    double auc = 0.0;
};

inline constexpr int kSuccessThresholds = 21;

// OP at thresholds 0, 0.05, ..., 1; AUC is their unweighted mean.
inline SuccessCurve success_curve(std::span<const double> ious) {
    if (ious.empty())
        throw ArgumentError("success_curve: empty IoU list");
    SuccessCurve curve;
    double sum = 0.0;
    for (int i = 0; i < kSuccessThresholds; ++i) {
        const double t = i / 20.0;
        const double op = overlap_precision(ious, t);
        curve.thresholds.push_back(t);
        curve.op_values.push_back(op);
        sum += op;
    }
    curve.auc = sum / kSuccessThresholds;
    return curve;
}

// One box per line, "x,y,w,h" with comma and/or whitespace separators.
inline std::vector<Box> parse_groundtruth(std::istream& in) {
    std::vector<Box> boxes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::replace(line.begin(), line.end(), '\t', ' ');
        std::istringstream fields(line);
        std::vector<double> v;
        std::string tok;
        while (fields >> tok) {
            char* end = nullptr;
            const double d = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0')
                throw ParseError("malformed number '" + tok + "'", lineno);
            v.push_back(d);
        }
        if (v.empty())
            continue;
        if (v.size() != 4)
            throw ParseError("expected 4 fields (x,y,w,h), got " + std::to_string(v.size()), lineno);
        if (v[2] < 0.0 || v[3] < 0.0)
            throw ParseError("negative box extent", lineno);
        boxes.push_back({v[0], v[1], v[2], v[3]});
    }
    return boxes;
}

inline std::vector<Box> parse_groundtruth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open ground truth file " + path.string());
    return parse_groundtruth(in);
}

inline std::vector<double> ious(std::span<const Box> a, std::span<const Box> b) {
    if (a.size() != b.size())
        throw DimensionError("ious: " + std::to_string(a.size()) + " boxes vs " + std::to_string(b.size()));
    std::vector<double> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out.push_back(iou(a[i], b[i]));
    return out;
}

} // namespace ddcf
