#pragma once

// Sub-filter displacement: position gradient of the classification error plus
// the linear deformation prior, Barzilai-Borwein descent, and the closed-form
// estimate of the prior's transform R.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "errors.hpp"
#include "spectral.hpp"
#include "training.hpp"
#include "types.hpp"

namespace ddcf {

enum class TransformMode { affine, identity };

struct DeformationState {
    std::vector<Vec2> initial; // first-frame positions, relative to the target center
    std::vector<Vec2> current;
    Mat2 transform = Mat2::identity();
    double lambda = 0.0;
    TransformMode mode = TransformMode::affine;
    std::vector<bool> fixed; // positions excluded from descent (root filter); empty = all free

    std::size_t size() const { return current.size(); }
    bool is_fixed(std::size_t m) const { return m < fixed.size() && fixed[m]; }

    void validate() const {
        if (initial.size() != current.size())
            throw DimensionError("DeformationState: initial/current size mismatch");
        if (!fixed.empty() && fixed.size() != current.size())
            throw DimensionError("DeformationState: fixed mask size mismatch");
        if (!(lambda >= 0.0))
            throw ArgumentError("DeformationState: lambda must be nonnegative");
    }
};

struct BBParams {
    int max_iterations = 10;
    double initial_step = 1.0;
    double min_step = 1e-4;
    double max_step = 10.0;
    double fallback_factor = 0.5; // step multiplier of the descent safeguard
    int max_fallbacks = 10;
    double gradient_tolerance = 1e-6;

    void validate() const {
        if (max_iterations < 1)
            throw ArgumentError("BBParams: max_iterations must be >= 1");
        if (!(min_step > 0.0) || !(min_step <= max_step))
            throw ArgumentError("BBParams: need 0 < min_step <= max_step");
        if (!(initial_step > 0.0))
            throw ArgumentError("BBParams: initial step must be positive");
        if (!(fallback_factor > 0.0 && fallback_factor < 1.0))
            throw ArgumentError("BBParams: fallback factor must be in (0, 1)");
    }
};

inline double reg_energy(const DeformationState& state) {
    return deformation_energy(state.initial, state.current, state.transform, state.lambda);
}

// R minimizing sum_m |pc_m - R p1_m|^2 from the normal equations. A ridge of
// 1e-8 * trace / 2 is added only when the initial configuration is
// numerically rank deficient (e.g. collinear points).
inline Mat2 estimate_transform(std::span<const Vec2> p1, std::span<const Vec2> pc) {
    if (p1.size() != pc.size())
        throw DimensionError("estimate_transform: point count mismatch");
    if (p1.size() < 2)
        throw ArgumentError("estimate_transform: need at least two points");
    double sxx = 0, sxy = 0, syy = 0;
    double cxx = 0, cxy = 0, cyx = 0, cyy = 0;
    for (std::size_t m = 0; m < p1.size(); ++m) {
        sxx += p1[m].x * p1[m].x;
        sxy += p1[m].x * p1[m].y;
        syy += p1[m].y * p1[m].y;
        cxx += pc[m].x * p1[m].x;
        cxy += pc[m].x * p1[m].y;
        cyx += pc[m].y * p1[m].x;
        cyy += pc[m].y * p1[m].y;
    }
    const double tr = sxx + syy;
    if (tr == 0.0)
        throw DegenerateConfigurationError("estimate_transform: all initial positions at the origin");
    double det = sxx * syy - sxy * sxy;
    if (det <= 1e-12 * (0.25 * tr * tr)) {
        const double eps = 1e-8 * tr / 2.0;
        sxx += eps;
        syy += eps;
        det = sxx * syy - sxy * sxy;
    }
    // S^{-1}
    const double i11 = syy / det, i12 = -sxy / det, i22 = sxx / det;
    return {cxx * i11 + cxy * i12, cxx * i12 + cxy * i22, cyx * i11 + cyy * i12, cyx * i12 + cyy * i22};
}

// Classification error of one sample plus the position prior, as a function
// of that sample's sub-filter positions. Sub-filter scores are position
// independent and computed once.
class PositionObjective {
  public:
    PositionObjective(const FilterCoefficients& f, const TrainingSample& sample)
        : layout_(f.shape().layout), label_(sample.label), weight_(sample.weight) {
        check_sample(sample, f.shape(), "PositionObjective");
        for (int m = 0; m < f.subfilters(); ++m)
            scores_.push_back(subfilter_score(f, m, sample));
    }

    std::size_t subfilters() const { return scores_.size(); }

    Spectrum residual(std::span<const Vec2> positions) const {
        Spectrum s(layout_);
        for (std::size_t m = 0; m < scores_.size(); ++m)
            s += shift(scores_[m], positions[m]);
        return s - label_;
    }

    double data(std::span<const Vec2> positions) const { return weight_ * norm2(residual(positions)); }

    double energy(const DeformationState& st) const { return data(st.current) + reg_energy(st); }

    std::vector<Vec2> gradient(const DeformationState& st) const {
        if (st.current.size() != scores_.size())
            throw DimensionError("grad_positions: expected " + std::to_string(scores_.size()) + " positions");
        const Spectrum err = residual(st.current);
        const int K = layout_.K;
        const double wx = kTwoPi / layout_.period.x;
        const double wy = kTwoPi / layout_.period.y;
        std::vector<Vec2> g(scores_.size());
        for (std::size_t m = 0; m < scores_.size(); ++m) {
            const Spectrum moved = shift(scores_[m], st.current[m]);
            double gx = 0.0, gy = 0.0;
            for (int ky = -K; ky <= K; ++ky)
                for (int kx = -K; kx <= K; ++kx) {
                    // d/dp of beta = (-i 2 pi k / T) beta
                    const Complex t = std::conj(err.at(kx, ky)) * moved.at(kx, ky);
                    gx += (Complex(0.0, -wx * kx) * t).real();
                    gy += (Complex(0.0, -wy * ky) * t).real();
                }
            const Vec2 prior = st.current[m] - st.transform * st.initial[m];
            g[m] = {2.0 * weight_ * gx + 2.0 * st.lambda * prior.x, 2.0 * weight_ * gy + 2.0 * st.lambda * prior.y};
        }
        return g;
    }

  private:
    SpectrumLayout layout_;
    Spectrum label_;
    double weight_;
    std::vector<Spectrum> scores_;
};

// Gradient of weight * ||S_f{x} - y||^2 + lambda * sum |p - R p1|^2 with
// respect to each sub-filter position, at state.current.
inline std::vector<Vec2> grad_positions(const FilterCoefficients& f, const TrainingSample& sample,
                                        const DeformationState& state) {
    state.validate();
    return PositionObjective(f, sample).gradient(state);
}

namespace detail {

inline bool finite(std::span<const Vec2> v) {
    return std::all_of(v.begin(), v.end(), [](Vec2 p) { return std::isfinite(p.x) && std::isfinite(p.y); });
}

inline double free_norm(const DeformationState& st, std::span<const Vec2> g) {
    double acc = 0.0;
    for (std::size_t m = 0; m < g.size(); ++m)
        if (!st.is_fixed(m))
            acc += dot(g[m], g[m]);
    return std::sqrt(acc);
}

inline void refit_transform(DeformationState& st) {
    if (st.mode != TransformMode::affine || st.size() < 2)
        return;
    try {
        st.transform = estimate_transform(st.initial, st.current);
    } catch (const DegenerateConfigurationError&) {
        // keep the previous transform
    }
}

inline DeformationState step_from(const DeformationState& base, std::span<const Vec2> g, double step) {
    DeformationState next = base;
    for (std::size_t m = 0; m < g.size(); ++m)
        if (!base.is_fixed(m))
            next.current[m] -= step * g[m];
    refit_transform(next);
    return next;
}

} // namespace detail

// Barzilai-Borwein (BB1) descent on the free positions of the current
// sample. In affine mode R is refit after every position update. The best
// iterate seen is returned, so the objective never increases; a NaN
// gradient returns the input unchanged.
inline DeformationState bb_descent(const FilterCoefficients& f, const TrainingSample& sample,
                                   const DeformationState& state, const BBParams& params) {
    params.validate();
    state.validate();
    if (state.size() != static_cast<std::size_t>(f.subfilters()))
        throw DimensionError("bb_descent: position count does not match sub-filter count");
    const PositionObjective objective(f, sample);

    const double e0 = objective.energy(state);
    std::vector<Vec2> g = objective.gradient(state);
    if (!detail::finite(g) || !std::isfinite(e0))
        return state;
    if (detail::free_norm(state, g) < params.gradient_tolerance)
        return state;

    DeformationState best = state;
    double e_best = e0;
    DeformationState cur = state;
    double step = std::clamp(params.initial_step, params.min_step, params.max_step);
    DeformationState last_base = cur;
    std::vector<Vec2> last_grad = g;
    double last_step = step;
    double e_cur = e0;

    for (int it = 0; it < params.max_iterations; ++it) {
        DeformationState next = detail::step_from(cur, g, step);
        const double e_next = objective.energy(next);
        std::vector<Vec2> g_next = objective.gradient(next);
        if (!detail::finite(g_next) || !std::isfinite(e_next))
            return state;
        if (e_next < e_best) {
            best = next;
            e_best = e_next;
        }
        last_base = cur;
        last_grad = g;
        last_step = step;

        double ss = 0.0, sy = 0.0;
        for (std::size_t m = 0; m < g.size(); ++m) {
            if (state.is_fixed(m))
                continue;
            const Vec2 s = next.current[m] - cur.current[m];
            const Vec2 y = g_next[m] - g[m];
            ss += dot(s, s);
            sy += dot(s, y);
        }
        if (sy > 0.0)
            step = std::clamp(ss / sy, params.min_step, params.max_step);

        cur = std::move(next);
        e_cur = e_next;
        g = std::move(g_next);
        if (detail::free_norm(state, g) < params.gradient_tolerance)
            break;
    }

    if (e_cur > e0) {
        double trial = last_step;
        for (int j = 0; j < params.max_fallbacks; ++j) {
            trial *= params.fallback_factor;
            DeformationState cand = detail::step_from(last_base, last_grad, trial);
            const double e = objective.energy(cand);
            if (std::isfinite(e) && e < e_best) {
                best = std::move(cand);
                e_best = e;
            }
            if (e < e0)
                break;
        }
    }
    if (state.mode == TransformMode::identity)
        best.transform = Mat2::identity();
    return best;
}

} // namespace ddcf
