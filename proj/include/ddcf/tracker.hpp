#pragma once

// Online tracking loop: grid-initialized sub-filters around a fixed root
// filter, scale-pyramid detection on the continuous score function, then
// the model update (position descent, transform refit, coefficient solve).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deformation.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "image.hpp"
#include "spectral.hpp"
#include "training.hpp"
#include "types.hpp"

namespace ddcf {

// Position-prior weights used on the two benchmark families.
inline constexpr double kLambdaOtb = 3e-4;
inline constexpr double kLambdaVot = 3e-6;

// Targets below this area (px^2) get a 2x2 part grid, others 3x3.
inline constexpr double kSmallTargetArea = 6400.0;

struct TrackerConfig {
    int parts_grid = -1; // -1: by target area; 0: root only; n: n x n parts
    double lambda_p = kLambdaOtb;
    TransformMode mode = TransformMode::affine;
    int scales = 5;
    double scale_step = 1.02;
    double scale_penalty = 0.98; // score multiplier per pyramid step away from the current scale
    FeatureConfig features;
    bool normalize_features = true; // scale each sample to unit mean-square feature energy
    bool square_region = false; // square sample region sized by the longer target side
    int min_cells = 16; // longest side of the sample grid, in cells
    int max_cells = 32;
    CgOptions init_cg{100, 1e-6};
    CgOptions update_cg{5, 1e-6};
    BBParams bb{10, 50.0, 1e-2, 1e4, 0.5, 10, 1e-12};
    double learning_rate = 0.0125;
    int memory_capacity = 30;
    double sigma_factor = 0.1;    // label sigma relative to the target size
    bool isotropic_label = false; // sigma from sqrt(target area) instead of per axis
    int reg_support = 2;          // regularizer spectrum is (2s+1)^2
    double reg_base = 1e-3;
    double root_reg_quad = 2e-2;
    double part_reg_quad = 2e-2;
    double part_radius_ratio = 1.0 / 3.0;
    double prediction_blend = 0.5; // weight of R p1 in the detection-time positions
    int oversampling = 4;
    int newton_iterations = 5;

    void validate() const {
        features.validate();
        if (scales < 1 || scales % 2 == 0)
            throw ArgumentError("TrackerConfig: scale count must be odd and >= 1");
        if (!(scale_step > 1.0))
            throw ArgumentError("TrackerConfig: scale step must be > 1");
        if (!(scale_penalty > 0.0 && scale_penalty <= 1.0))
            throw ArgumentError("TrackerConfig: scale penalty must be in (0, 1]");
        if (parts_grid < -1)
            throw ArgumentError("TrackerConfig: parts_grid must be -1, 0 or positive");
        if (!(lambda_p >= 0.0))
            throw ArgumentError("TrackerConfig: lambda_p must be nonnegative");
        if (min_cells < 1 || max_cells < min_cells)
            throw ArgumentError("TrackerConfig: need 1 <= min_cells <= max_cells");
        if (memory_capacity < 1)
            throw ArgumentError("TrackerConfig: memory capacity must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw ArgumentError("TrackerConfig: learning rate must be in (0, 1]");
        if (!(sigma_factor > 0.0))
            throw ArgumentError("TrackerConfig: sigma factor must be positive");
        if (!(reg_base > 0.0) || root_reg_quad < 0.0 || part_reg_quad < 0.0 || reg_support < 0)
            throw ArgumentError("TrackerConfig: invalid regularizer parameters");
        if (!(part_radius_ratio > 0.0))
            throw ArgumentError("TrackerConfig: part radius ratio must be positive");
        if (prediction_blend < 0.0 || prediction_blend > 1.0)
            throw ArgumentError("TrackerConfig: prediction blend must be in [0, 1]");
        if (oversampling < 1 || newton_iterations < 0)
            throw ArgumentError("TrackerConfig: invalid detection parameters");
        bb.validate();
    }
};

// Parts grid for a target: 2 below kSmallTargetArea, 3 at or above.
inline int parts_grid_for(const TrackerConfig& cfg, Vec2 target_size) {
    if (cfg.parts_grid >= 0)
        return cfg.parts_grid;
    return target_size.x * target_size.y < kSmallTargetArea ? 2 : 3;
}

// Part centers relative to the target center, in pixels.
inline std::vector<Vec2> grid_positions(int grid, Vec2 target_size) {
    std::vector<Vec2> out;
    if (grid <= 0)
        return out;
    if (grid == 2) {
        for (double sy : {-1.0, 1.0})
            for (double sx : {-1.0, 1.0})
                out.push_back({sx * target_size.x / 4.0, sy * target_size.y / 4.0});
        return out;
    }
    if (grid == 3) {
        for (double sy : {-1.0, 0.0, 1.0})
            for (double sx : {-1.0, 0.0, 1.0})
                out.push_back({sx * target_size.x / 3.0, sy * target_size.y / 3.0});
        return out;
    }
    // general n x n: cell centers of a uniform grid over the target extent
    for (int j = 0; j < grid; ++j)
        for (int i = 0; i < grid; ++i)
            out.push_back({((i + 0.5) / grid - 0.5) * target_size.x, ((j + 0.5) / grid - 0.5) * target_size.y});
    return out;
}

struct TrackState {
    Vec2 center;       // image pixels
    Vec2 target_size;  // at scale 1
    double scale = 1.0;
    FilterCoefficients filter;
    DeformationState deformation; // positions in period units of the sample domain
    SampleMemory memory{1, 1.0};
    long frame = 0;
};

struct Detection {
    Vec2 center;
    double scale = 1.0;
    double score = 0.0;
    int scale_index = 0;
    Vec2 offset;                  // argmax in period units
    std::vector<Vec2> positions;  // sub-filter positions used for detection
};

struct FrameResult {
    std::size_t frame_index = 0;
    Box box;
    double score = 0.0;
    std::vector<Vec2> subfilter_positions; // image pixels
    Mat2 transform;
};

class Tracker {
  public:
    Tracker(TrackerConfig config, FeatureExtractor extractor)
        : config_(std::move(config)), extractor_(std::move(extractor)) {
        config_.validate();
    }

    const TrackerConfig& config() const { return config_; }
    const TrackState& state() const { return state_; }
    bool initialized() const { return initialized_; }
    Vec2 region_size() const { return region_; }
    int cells_x() const { return cells_x_; }
    int cells_y() const { return cells_y_; }
    const SpectrumLayout& layout() const { return layout_; }
    const SpatialRegularizer& regularizer() const { return regularizer_; }
    const Spectrum& label() const { return label_; }

    FrameResult init(const Image& frame, const Box& bbox, std::size_t frame_index = 0) {
        if (!(bbox.w > 0.0) || !(bbox.h > 0.0))
            throw ArgumentError("Tracker::init: bounding box must have positive area");
        if (frame.empty())
            throw ArgumentError("Tracker::init: empty frame");

        state_ = TrackState{};
        state_.center = {bbox.cx(), bbox.cy()};
        state_.target_size = {bbox.w, bbox.h};
        state_.scale = 1.0;

        const double pad = std::sqrt(config_.features.padding);
        region_ = state_.target_size * pad;
        if (config_.square_region)
            region_.x = region_.y = std::max(region_.x, region_.y);
        const double longest = std::max(region_.x, region_.y) / config_.features.cell_size;
        const double f = std::clamp(longest, static_cast<double>(config_.min_cells),
                                    static_cast<double>(config_.max_cells)) / longest;
        cells_x_ = std::max(1, static_cast<int>(std::lround(region_.x / config_.features.cell_size * f)));
        cells_y_ = std::max(1, static_cast<int>(std::lround(region_.y / config_.features.cell_size * f)));
        layout_ = SpectrumLayout({1.0, 1.0}, std::max(cells_x_, cells_y_) / 2);
        kernels_.clear();

        Vec2 sigma_px = state_.target_size * config_.sigma_factor;
        if (config_.isotropic_label)
            sigma_px.x = sigma_px.y = config_.sigma_factor * std::sqrt(state_.target_size.x * state_.target_size.y);
        const Vec2 sigma{sigma_px.x / region_.x, sigma_px.y / region_.y};
        label_ = gaussian_label(layout_, sigma);

        TrainingSample first = make_sample(frame, frame_index, state_.center, state_.scale);
        const int D = static_cast<int>(first.channels.size());

        // Sub-filter 0 is the root, fixed at the target center. The score
        // shifts each sub-filter's convolution output by +p, so a sub-filter
        // reads the image at -p; offsets are stored negated.
        const int grid = parts_grid_for(config_, state_.target_size);
        std::vector<Vec2> p1{{0.0, 0.0}};
        for (Vec2 p : grid_positions(grid, state_.target_size))
            p1.push_back(to_period(-p));
        const int M = static_cast<int>(p1.size());

        FilterShape shape{layout_, M, {}};
        for (int d = 0; d < D; ++d)
            shape.bands.push_back(kernel_for(first_resolution_[d].first, first_resolution_[d].second).band());

        const Vec2 root_radius{0.5 * state_.target_size.x / region_.x, 0.5 * state_.target_size.y / region_.y};
        std::vector<Spectrum> by_subfilter;
        by_subfilter.push_back(quadratic_regularizer(layout_.period, config_.reg_support, config_.reg_base,
                                                     config_.root_reg_quad, root_radius));
        for (int m = 1; m < M; ++m)
            by_subfilter.push_back(quadratic_regularizer(layout_.period, config_.reg_support, config_.reg_base,
                                                         config_.part_reg_quad,
                                                         root_radius * config_.part_radius_ratio));
        regularizer_ = SpatialRegularizer::per_subfilter(by_subfilter, D);

        DeformationState def;
        def.initial = p1;
        def.current = p1;
        def.transform = Mat2::identity();
        def.lambda = config_.lambda_p;
        def.mode = config_.mode;
        def.fixed.assign(p1.size(), false);
        def.fixed[0] = true;
        state_.deformation = std::move(def);

        state_.memory = SampleMemory(static_cast<std::size_t>(config_.memory_capacity), config_.learning_rate);
        first.positions = p1;
        state_.memory.insert(std::move(first));
        state_.filter = solve_coefficients(shape, state_.memory.samples(), regularizer_, config_.init_cg).coefficients;
        state_.frame = 1;
        initialized_ = true;
        return result(frame_index, 0.0);
    }

    // Detection-time positions: blend of the transform prediction R p1 and the
    // previous frame's positions. The root stays at the origin.
    std::vector<Vec2> predicted_positions() const {
        const DeformationState& d = state_.deformation;
        std::vector<Vec2> out(d.current.size());
        const double a = config_.prediction_blend;
        for (std::size_t m = 0; m < out.size(); ++m)
            out[m] = d.is_fixed(m) ? d.current[m] : a * (d.transform * d.initial[m]) + (1.0 - a) * d.current[m];
        return out;
    }

    Detection detect(const Image& frame, std::size_t frame_index) const {
        require_init("detect");
        const std::vector<Vec2> positions = predicted_positions();
        const int S = config_.scales;
        Detection best;
        best.center = state_.center;
        best.scale = state_.scale;
        best.positions = positions;
        bool found = false;
        double best_rank = 0.0;
        for (int i = 0; i < S; ++i) {
            const double factor = std::pow(config_.scale_step, i - (S - 1) / 2);
            const double sc = state_.scale * factor;
            const TrainingSample sample = make_sample(frame, frame_index, state_.center, sc);
            const Spectrum score = full_score(state_.filter, sample, positions);
            const auto peak = locate_peak(score);
            if (!peak)
                continue;
            const double rank = peak->second * std::pow(config_.scale_penalty, std::abs(i - (S - 1) / 2));
            if (!found || rank > best_rank) {
                found = true;
                best_rank = rank;
                best.score = peak->second;
                best.offset = peak->first;
                best.scale = sc;
                best.scale_index = i;
                best.center = state_.center + Vec2{peak->first.x * region_.x * sc, peak->first.y * region_.y * sc};
            }
        }
        if (!found) {
            best.score = 0.0;
            best.scale = state_.scale;
            best.center = state_.center;
        }
        best.center.x = std::clamp(best.center.x, 0.0, static_cast<double>(frame.width));
        best.center.y = std::clamp(best.center.y, 0.0, static_cast<double>(frame.height));
        return best;
    }

    // Model update at the detected state. A numerical failure in the solve
    // keeps the previous coefficients.
    void update(const Image& frame, std::size_t frame_index, const Detection& det) {
        require_init("update");
        state_.center = det.center;
        state_.scale = det.scale;
        TrainingSample sample = make_sample(frame, frame_index, state_.center, state_.scale);
        sample.weight = state_.memory.incoming_weight();

        DeformationState start = state_.deformation;
        start.current = predicted_positions();
        DeformationState moved = start;
        if (has_free_positions()) {
            moved = bb_descent(state_.filter, sample, start, config_.bb);
        }
        state_.deformation = std::move(moved);
        sample.positions = state_.deformation.current;
        state_.memory.insert(std::move(sample));
        try {
            state_.filter = solve_coefficients(state_.filter.shape(), state_.memory.samples(), regularizer_,
                                               config_.update_cg, &state_.filter)
                                .coefficients;
        } catch (const NumericalError&) {
            // stale model
        }
        ++state_.frame;
    }

    FrameResult track(const Image& frame, std::size_t frame_index) {
        const Detection det = detect(frame, frame_index);
        update(frame, frame_index, det);
        return result(frame_index, det.score);
    }

    TrainingSample make_sample(const Image& frame, std::size_t frame_index, Vec2 center, double scale) const {
        FeatureMap fm = extractor_.extract(frame, frame_index, center, region_, scale, cells_x_, cells_y_);
        validate(fm);
        if (config_.normalize_features)
            normalize_energy(fm);
        TrainingSample s;
        if (first_resolution_.empty()) {
            for (const Grid& g : fm.channels)
                first_resolution_.emplace_back(g.width, g.height);
        }
        for (const Grid& g : fm.channels)
            s.channels.push_back(interpolate(g, kernel_for(g.width, g.height)));
        s.label = label_;
        return s;
    }

    FrameResult result(std::size_t frame_index, double score) const {
        FrameResult r;
        r.frame_index = frame_index;
        const Vec2 size = state_.target_size * state_.scale;
        r.box = {state_.center.x - 0.5 * size.x, state_.center.y - 0.5 * size.y, size.x, size.y};
        r.score = score;
        for (Vec2 p : state_.deformation.current)
            r.subfilter_positions.push_back(state_.center - to_pixels(p, state_.scale));
        r.transform = state_.deformation.transform;
        return r;
    }

    Vec2 to_period(Vec2 pixels) const { return {pixels.x / region_.x, pixels.y / region_.y}; }
    Vec2 to_pixels(Vec2 t, double scale) const { return {t.x * region_.x * scale, t.y * region_.y * scale}; }

    // Grid argmax of the score refined by Newton steps on the trigonometric
    // polynomial; returns (offset, score) or nothing for a flat score.
    std::optional<std::pair<Vec2, double>> locate_peak(const Spectrum& score) const {
        const int nx = config_.oversampling * cells_x_;
        const int ny = config_.oversampling * cells_y_;
        const Grid g = evaluate_grid(score, nx, ny);
        const auto [mn, mx] = std::minmax_element(g.values.begin(), g.values.end());
        if (*mx - *mn <= 1e-12 * (1.0 + std::abs(*mx)))
            return std::nullopt;
        const std::size_t idx = static_cast<std::size_t>(mx - g.values.begin());
        const int ix = static_cast<int>(idx % nx), iy = static_cast<int>(idx / nx);
        const Vec2 grid_t{static_cast<double>(ix - nx / 2) / nx, static_cast<double>(iy - ny / 2) / ny};
        const double grid_v = *mx;

        Vec2 t = grid_t;
        bool ok = true;
        for (int it = 0; it < config_.newton_iterations; ++it) {
            const LocalExpansion e = evaluate_with_derivatives(score, t);
            const double det = e.hxx * e.hyy - e.hxy * e.hxy;
            if (!(e.hxx < 0.0 && det > 0.0)) {
                ok = false;
                break;
            }
            const Vec2 step{(e.hyy * e.gradient.x - e.hxy * e.gradient.y) / det,
                            (-e.hxy * e.gradient.x + e.hxx * e.gradient.y) / det};
            t -= step;
        }
        if (ok && (std::abs(t.x - grid_t.x) > 1.0 / nx || std::abs(t.y - grid_t.y) > 1.0 / ny))
            ok = false;
        double v = grid_v;
        if (ok) {
            v = evaluate(score, t);
            if (v < grid_v)
                ok = false;
        }
        if (!ok) {
            t = grid_t;
            v = evaluate(score, t);
        }
        return std::make_pair(t, v);
    }

  private:
    static void normalize_energy(FeatureMap& fm) {
        double acc = 0.0;
        std::size_t n = 0;
        for (const Grid& g : fm.channels) {
            for (double v : g.values)
                acc += v * v;
            n += g.values.size();
        }
        if (!(acc > 0.0))
            return;
        const double f = std::sqrt(static_cast<double>(n) / acc);
        for (Grid& g : fm.channels)
            for (double& v : g.values)
                v *= f;
    }

    void require_init(const char* where) const {
        if (!initialized_)
            throw ArgumentError(std::string("Tracker::") + where + ": tracker not initialized");
    }

    bool has_free_positions() const {
        const DeformationState& d = state_.deformation;
        for (std::size_t m = 0; m < d.size(); ++m)
            if (!d.is_fixed(m))
                return true;
        return false;
    }

    const InterpolationKernel& kernel_for(int w, int h) const {
        for (const auto& k : kernels_)
            if (k.samples_x() == w && k.samples_y() == h)
                return k;
        kernels_.emplace_back(layout_, w, h);
        return kernels_.back();
    }

    TrackerConfig config_;
    FeatureExtractor extractor_;
    TrackState state_;
    bool initialized_ = false;
    Vec2 region_;
    int cells_x_ = 0;
    int cells_y_ = 0;
    SpectrumLayout layout_;
    Spectrum label_;
    SpatialRegularizer regularizer_;
    mutable std::deque<InterpolationKernel> kernels_;
    mutable std::vector<std::pair<int, int>> first_resolution_;
};

struct NoFrameCallback {
    void operator()(const FrameResult&) const {}
};

// Runs init on the first frame and detect+update on the rest. Failures to
// obtain a frame surface as SequenceError carrying the frame index.
template <class FrameSource, class OnFrame = NoFrameCallback>
std::vector<FrameResult> track_sequence(Tracker& tracker, FrameSource&& frame_at, std::size_t frame_count,
                                        const Box& init_box, OnFrame&& on_frame = {}) {
    if (frame_count < 1)
        throw ArgumentError("track_sequence: need at least one frame");
    auto fetch = [&](std::size_t i) -> decltype(auto) {
        try {
            return frame_at(i);
        } catch (const SequenceError&) {
            throw;
        } catch (const std::exception& e) {
            throw SequenceError(e.what(), i);
        }
    };
    std::vector<FrameResult> out;
    out.push_back(tracker.init(fetch(0), init_box, 0));
    out.front().box = init_box;
    on_frame(out.back());
    for (std::size_t i = 1; i < frame_count; ++i) {
        out.push_back(tracker.track(fetch(i), i));
        on_frame(out.back());
    }
    return out;
}

inline std::vector<FrameResult> track_sequence(std::span<const Image> frames, const Box& init_box,
                                               const TrackerConfig& config, FeatureExtractor extractor) {
    Tracker tracker(config, std::move(extractor));
    return track_sequence(tracker, [&](std::size_t i) -> const Image& { return frames[i]; }, frames.size(), init_box);
}

} // namespace ddcf
