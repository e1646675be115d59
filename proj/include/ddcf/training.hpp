#pragma once

// Coefficient learning for the deformable filter: labels, the weighted sample
// memory, the matrix-free normal operator (A^H Gamma A + W^H W) and its
// conjugate-gradient solve.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cg.hpp"
#include "errors.hpp"
#include "spectral.hpp"
#include "types.hpp"

namespace ddcf {

// Layout shared by all filter spectra plus per-channel bands.
struct FilterShape {
    SpectrumLayout layout;
    int subfilters = 1;
    std::vector<Band> bands; // one per feature channel

    int channels() const { return static_cast<int>(bands.size()); }
    std::size_t unknowns() const { return static_cast<std::size_t>(subfilters) * bands.size() * layout.size(); }
    friend bool operator==(const FilterShape&, const FilterShape&) = default;
};

// Sub-filter spectra f^m_d stored m-major, then channel.
class FilterCoefficients {
  public:
    FilterCoefficients() = default;
    explicit FilterCoefficients(FilterShape shape) : shape_(std::move(shape)) {
        if (shape_.subfilters < 1 || shape_.bands.empty())
            throw DimensionError("FilterCoefficients: need at least one sub-filter and one channel");
        spectra_.assign(static_cast<std::size_t>(shape_.subfilters) * shape_.bands.size(), Spectrum(shape_.layout));
    }

    const FilterShape& shape() const { return shape_; }
    int subfilters() const { return shape_.subfilters; }
    int channels() const { return shape_.channels(); }

    Spectrum& at(int m, int d) { return spectra_[static_cast<std::size_t>(m) * shape_.bands.size() + d]; }
    const Spectrum& at(int m, int d) const { return spectra_[static_cast<std::size_t>(m) * shape_.bands.size() + d]; }

    std::span<Spectrum> spectra() { return spectra_; }
    std::span<const Spectrum> spectra() const { return spectra_; }

    void axpy(Complex s, const FilterCoefficients& o) {
        check_same(o, "FilterCoefficients::axpy");
        for (std::size_t i = 0; i < spectra_.size(); ++i)
            spectra_[i].axpy(s, o.spectra_[i]);
    }
    FilterCoefficients& operator*=(Complex s) {
        for (Spectrum& sp : spectra_)
            sp *= s;
        return *this;
    }
    FilterCoefficients& operator+=(const FilterCoefficients& o) {
        axpy(1.0, o);
        return *this;
    }
    friend FilterCoefficients operator+(FilterCoefficients a, const FilterCoefficients& b) { return a += b; }

    friend Complex inner(const FilterCoefficients& a, const FilterCoefficients& b) {
        a.check_same(b, "inner(FilterCoefficients)");
        Complex acc = 0.0;
        for (std::size_t i = 0; i < a.spectra_.size(); ++i)
            acc += inner(a.spectra_[i], b.spectra_[i]);
        return acc;
    }

    void check_same(const FilterCoefficients& o, const char* where) const {
        if (!(shape_ == o.shape_))
            throw DimensionError(std::string(where) + ": shape mismatch");
    }

    void symmetrize() {
        for (Spectrum& sp : spectra_)
            sp = ddcf::symmetrize(sp);
    }

    // Zero every coefficient outside its channel band.
    void apply_bands() {
        for (int m = 0; m < subfilters(); ++m)
            for (int d = 0; d < channels(); ++d)
                apply_band(at(m, d), shape_.bands[d]);
    }

    bool all_finite() const {
        for (const Spectrum& sp : spectra_)
            for (const Complex& c : sp.coeffs())
                if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                    return false;
        return true;
    }

  private:
    FilterShape shape_;
    std::vector<Spectrum> spectra_;
};

struct TrainingSample {
    std::vector<Spectrum> channels; // interpolated sample spectra, one per feature channel
    Spectrum label;
    double weight = 0.0;
    std::vector<Vec2> positions;    // sub-filter positions for this sample
};

inline void check_sample(const TrainingSample& s, const FilterShape& shape, const char* where) {
    if (static_cast<int>(s.channels.size()) != shape.channels())
        throw DimensionError(std::string(where) + ": sample has " + std::to_string(s.channels.size()) +
                             " channels, filter has " + std::to_string(shape.channels()));
    for (const Spectrum& c : s.channels)
        if (!(c.layout() == shape.layout))
            throw DimensionError(std::string(where) + ": sample channel layout mismatch");
    if (!(s.label.layout() == shape.layout))
        throw DimensionError(std::string(where) + ": label layout mismatch");
}

// Fourier coefficients of the periodically summed Gaussian centered at offset.
inline Spectrum gaussian_label(const SpectrumLayout& layout, Vec2 sigma, Vec2 offset = {}) {
    if (!(sigma.x > 0.0) || !(sigma.y > 0.0))
        throw ArgumentError("gaussian_label: sigma must be positive");
    const Vec2 T = layout.period;
    const int K = layout.K;
    const double amplitude = kTwoPi * sigma.x * sigma.y / (T.x * T.y);
    Spectrum out(layout);
    for (int ky = -K; ky <= K; ++ky)
        for (int kx = -K; kx <= K; ++kx) {
            const double ex = sigma.x * kx / T.x;
            const double ey = sigma.y * ky / T.y;
            const double mag = amplitude * std::exp(-2.0 * kPi * kPi * (ex * ex + ey * ey));
            const double phase = -kTwoPi * (kx * offset.x / T.x + ky * offset.y / T.y);
            out.at(kx, ky) = std::polar(mag, phase);
        }
    return out;
}

// sum_d f^m_d * J{x_d}
inline Spectrum subfilter_score(const FilterCoefficients& f, int m, const TrainingSample& sample) {
    if (static_cast<int>(sample.channels.size()) != f.channels())
        throw DimensionError("subfilter_score: channel count mismatch");
    Spectrum out(f.shape().layout);
    auto o = out.coeffs();
    for (int d = 0; d < f.channels(); ++d) {
        const auto x = sample.channels[d].coeffs();
        const auto w = f.at(m, d).coeffs();
        if (x.size() != o.size())
            throw DimensionError("subfilter_score: layout mismatch");
        for (std::size_t i = 0; i < o.size(); ++i)
            o[i] += w[i] * x[i];
    }
    return out;
}

// sum_m shift(subfilter_score_m, p^m)
inline Spectrum full_score(const FilterCoefficients& f, const TrainingSample& sample, std::span<const Vec2> positions) {
    if (static_cast<int>(positions.size()) != f.subfilters())
        throw DimensionError("full_score: expected " + std::to_string(f.subfilters()) + " positions, got " +
                             std::to_string(positions.size()));
    Spectrum out(f.shape().layout);
    for (int m = 0; m < f.subfilters(); ++m)
        out += shift(subfilter_score(f, m, sample), positions[m]);
    return out;
}

inline Spectrum full_score(const FilterCoefficients& f, const TrainingSample& sample) {
    return full_score(f, sample, sample.positions);
}

// Quadratic-bowl regularization w(t) = base + quad * ((tx/rx)^2 + (ty/ry)^2)
// over the centered period, kept to |k| <= support per axis.
inline Spectrum quadratic_regularizer(Vec2 period, int support, double base, double quad, Vec2 radius) {
    if (support < 0)
        throw ArgumentError("quadratic_regularizer: support must be >= 0");
    if (!(radius.x > 0.0) || !(radius.y > 0.0))
        throw ArgumentError("quadratic_regularizer: radius must be positive");
    Spectrum w(SpectrumLayout(period, support));
    const double cx = quad / (radius.x * radius.x);
    const double cy = quad / (radius.y * radius.y);
    // Periodic t^2 on [-T/2, T/2): c0 = T^2/12, ck = T^2 (-1)^k / (2 pi^2 k^2).
    w.at(0, 0) = base + cx * period.x * period.x / 12.0 + cy * period.y * period.y / 12.0;
    for (int k = 1; k <= support; ++k) {
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        const double vx = cx * period.x * period.x * sign / (2.0 * kPi * kPi * k * k);
        const double vy = cy * period.y * period.y * sign / (2.0 * kPi * kPi * k * k);
        w.at(k, 0) = w.at(-k, 0) = vx;
        w.at(0, k) = w.at(0, -k) = vy;
    }
    return w;
}

// Regularization spectra w^{m,d}, m-major like the filter.
class SpatialRegularizer {
  public:
    SpatialRegularizer() = default;
    SpatialRegularizer(int subfilters, int channels, std::vector<Spectrum> spectra)
        : subfilters_(subfilters), channels_(channels), spectra_(std::move(spectra)) {
        if (static_cast<int>(spectra_.size()) != subfilters * channels)
            throw DimensionError("SpatialRegularizer: expected M*D spectra");
        for (const Spectrum& w : spectra_) {
            if (!is_real_symmetric(w))
                throw ArgumentError("SpatialRegularizer: spectra must be real-symmetric");
            if (!(w.at(0, 0).real() > 0.0))
                throw ArgumentError("SpatialRegularizer: mean penalty w[0,0] must be positive");
        }
    }

    // Same spectrum for every channel of sub-filter m.
    static SpatialRegularizer per_subfilter(const std::vector<Spectrum>& by_subfilter, int channels) {
        std::vector<Spectrum> all;
        for (const Spectrum& w : by_subfilter)
            for (int d = 0; d < channels; ++d)
                all.push_back(w);
        return SpatialRegularizer(static_cast<int>(by_subfilter.size()), channels, std::move(all));
    }

    int subfilters() const { return subfilters_; }
    int channels() const { return channels_; }
    const Spectrum& at(int m, int d) const { return spectra_[static_cast<std::size_t>(m) * channels_ + d]; }

    void check(const FilterShape& shape) const {
        if (subfilters_ != shape.subfilters || channels_ != shape.channels())
            throw DimensionError("SpatialRegularizer: does not match filter shape");
        for (const Spectrum& w : spectra_)
            if (!(w.layout().period == shape.layout.period))
                throw DimensionError("SpatialRegularizer: period mismatch");
    }

  private:
    int subfilters_ = 0;
    int channels_ = 0;
    std::vector<Spectrum> spectra_;
};

// Matrix-free (A^H Gamma A + W^H W) over a fixed set of samples. Shift factors
// are computed once at construction; products are accumulated in a fixed
// order so repeated applications are bit-reproducible.
class NormalOperator {
  public:
    NormalOperator(FilterShape shape, std::span<const TrainingSample> samples, const SpatialRegularizer& reg)
        : shape_(std::move(shape)), samples_(samples), reg_(&reg) {
        reg.check(shape_);
        for (const TrainingSample& s : samples_) {
            check_sample(s, shape_, "NormalOperator");
            if (static_cast<int>(s.positions.size()) != shape_.subfilters)
                throw DimensionError("NormalOperator: sample position count does not match sub-filter count");
            if (!(s.weight >= 0.0))
                throw ArgumentError("NormalOperator: negative sample weight");
            std::vector<Spectrum> betas;
            for (const Vec2& p : s.positions)
                betas.push_back(shift_factors(shape_.layout, p));
            shifts_.push_back(std::move(betas));
        }
    }

    const FilterShape& shape() const { return shape_; }

    FilterCoefficients operator()(const FilterCoefficients& f) const { return apply(f); }

    FilterCoefficients apply(const FilterCoefficients& f) const {
        if (!(f.shape() == shape_))
            throw DimensionError("NormalOperator: filter shape mismatch");
        FilterCoefficients out(shape_);
        const std::size_t n = shape_.layout.size();
        const int M = shape_.subfilters, D = shape_.channels();
        std::vector<Complex> score(n), part(n), back(n);
        for (std::size_t c = 0; c < samples_.size(); ++c) {
            const TrainingSample& s = samples_[c];
            if (s.weight == 0.0)
                continue;
            std::fill(score.begin(), score.end(), Complex(0.0));
            for (int m = 0; m < M; ++m) {
                std::fill(part.begin(), part.end(), Complex(0.0));
                for (int d = 0; d < D; ++d) {
                    const auto x = s.channels[d].coeffs();
                    const auto w = f.at(m, d).coeffs();
                    for (std::size_t i = 0; i < n; ++i)
                        part[i] += x[i] * w[i];
                }
                const auto beta = shifts_[c][m].coeffs();
                for (std::size_t i = 0; i < n; ++i)
                    score[i] += beta[i] * part[i];
            }
            for (int m = 0; m < M; ++m) {
                const auto beta = shifts_[c][m].coeffs();
                for (std::size_t i = 0; i < n; ++i)
                    back[i] = s.weight * std::conj(beta[i]) * score[i];
                for (int d = 0; d < D; ++d) {
                    const auto x = s.channels[d].coeffs();
                    auto g = out.at(m, d).coeffs();
                    for (std::size_t i = 0; i < n; ++i)
                        g[i] += std::conj(x[i]) * back[i];
                }
            }
        }
        for (int m = 0; m < M; ++m)
            for (int d = 0; d < D; ++d) {
                const Spectrum& w = reg_->at(m, d);
                out.at(m, d) += correlate_truncated(convolve(f.at(m, d), w), w, shape_.layout.K);
            }
        out.apply_bands();
        return out;
    }

    // A^H Gamma y
    FilterCoefficients rhs() const {
        FilterCoefficients out(shape_);
        const std::size_t n = shape_.layout.size();
        std::vector<Complex> back(n);
        for (std::size_t c = 0; c < samples_.size(); ++c) {
            const TrainingSample& s = samples_[c];
            if (s.weight == 0.0)
                continue;
            const auto y = s.label.coeffs();
            for (int m = 0; m < shape_.subfilters; ++m) {
                const auto beta = shifts_[c][m].coeffs();
                for (std::size_t i = 0; i < n; ++i)
                    back[i] = s.weight * std::conj(beta[i]) * y[i];
                for (int d = 0; d < shape_.channels(); ++d) {
                    const auto x = s.channels[d].coeffs();
                    auto g = out.at(m, d).coeffs();
                    for (std::size_t i = 0; i < n; ++i)
                        g[i] += std::conj(x[i]) * back[i];
                }
            }
        }
        out.apply_bands();
        return out;
    }

  private:
    FilterShape shape_;
    std::span<const TrainingSample> samples_;
    const SpatialRegularizer* reg_;
    std::vector<std::vector<Spectrum>> shifts_;
};

inline FilterCoefficients apply_normal_operator(const FilterCoefficients& f, std::span<const TrainingSample> samples,
                                                const SpatialRegularizer& reg) {
    return NormalOperator(f.shape(), samples, reg).apply(f);
}

struct SolveResult {
    FilterCoefficients coefficients;
    CgReport report;
};

// Solves (A^H Gamma A + W^H W) f = A^H Gamma y by conjugate gradient.
// Throws NumericalError on a non-finite residual; the caller's coefficients
// are untouched in that case.
template <class Callback = NoCgCallback>
SolveResult solve_coefficients(const FilterShape& shape, std::span<const TrainingSample> samples,
                               const SpatialRegularizer& reg, const CgOptions& options,
                               const FilterCoefficients* warm_start = nullptr, Callback&& on_iteration = Callback{}) {
    if (samples.empty())
        throw ArgumentError("solve_coefficients: empty sample memory");
    if (std::none_of(samples.begin(), samples.end(), [](const TrainingSample& s) { return s.weight > 0.0; }))
        throw ArgumentError("solve_coefficients: all sample weights are zero");
    const NormalOperator op(shape, samples, reg);
    FilterCoefficients x = warm_start ? *warm_start : FilterCoefficients(shape);
    x.check_same(FilterCoefficients(shape), "solve_coefficients(warm start)");
    x.apply_bands();
    const FilterCoefficients b = op.rhs();
    const CgReport report = conjugate_gradient(op, b, x, options, std::forward<Callback>(on_iteration));
    if (!x.all_finite())
        throw NumericalError("solve_coefficients: non-finite coefficients");
    x.symmetrize();
    return {std::move(x), report};
}

// sum_c alpha_c ||S_f{x^c} - y^c||^2 with each sample's stored positions.
inline double data_term(const FilterCoefficients& f, std::span<const TrainingSample> samples) {
    double acc = 0.0;
    for (const TrainingSample& s : samples) {
        check_sample(s, f.shape(), "data_term");
        if (s.weight == 0.0)
            continue;
        acc += s.weight * norm2(full_score(f, s) - s.label);
    }
    return acc;
}

// sum_{m,d} ||w^{m,d} * f^m_d||^2 via the full spectral convolution.
inline double spatial_term(const FilterCoefficients& f, const SpatialRegularizer& reg) {
    reg.check(f.shape());
    double acc = 0.0;
    for (int m = 0; m < f.subfilters(); ++m)
        for (int d = 0; d < f.channels(); ++d)
            acc += norm2(convolve(f.at(m, d), reg.at(m, d)));
    return acc;
}

// lambda * sum_m |p^m - R p1^m|^2
inline double deformation_energy(std::span<const Vec2> initial, std::span<const Vec2> current, const Mat2& R,
                                 double lambda) {
    if (initial.size() != current.size())
        throw DimensionError("deformation_energy: position count mismatch");
    double acc = 0.0;
    for (std::size_t m = 0; m < initial.size(); ++m) {
        const Vec2 r = current[m] - R * initial[m];
        acc += dot(r, r);
    }
    return lambda * acc;
}

struct ObjectiveTerms {
    double data = 0.0;        // classification error
    double spatial = 0.0;     // spatial regularization
    double deformation = 0.0; // position prior

    double total() const { return data + spatial + deformation; }
};

inline ObjectiveTerms objective(const FilterCoefficients& f, std::span<const TrainingSample> samples,
                                const SpatialRegularizer& reg, std::span<const Vec2> initial,
                                std::span<const Vec2> current, const Mat2& R, double lambda) {
    return {data_term(f, samples), spatial_term(f, reg), deformation_energy(initial, current, R, lambda)};
}

// Weighted training set with exponential forgetting.
class SampleMemory {
  public:
    SampleMemory(std::size_t capacity, double learning_rate) : capacity_(capacity), learning_rate_(learning_rate) {
        if (capacity_ < 1)
            throw ArgumentError("SampleMemory: capacity must be >= 1");
        if (!(learning_rate_ > 0.0) || learning_rate_ > 1.0)
            throw ArgumentError("SampleMemory: learning rate must be in (0, 1]");
    }

    std::size_t capacity() const { return capacity_; }
    double learning_rate() const { return learning_rate_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    std::span<const TrainingSample> samples() const { return samples_; }
    const TrainingSample& operator[](std::size_t i) const { return samples_[i]; }

    // Weight the incoming sample would receive if inserted now.
    double incoming_weight() const { return samples_.empty() ? 1.0 : learning_rate_; }

    // Existing weights decay by (1 - gamma), the new sample gets gamma. When
    // full, the lowest-weight existing sample (oldest on ties) is evicted.
    // Weights are renormalized to sum to one.
    void insert(TrainingSample sample) {
        if (!samples_.empty()) {
            const TrainingSample& ref = samples_.front();
            if (sample.channels.size() != ref.channels.size())
                throw DimensionError("SampleMemory::insert: channel count mismatch");
            for (std::size_t d = 0; d < ref.channels.size(); ++d)
                if (!(sample.channels[d].layout() == ref.channels[d].layout()))
                    throw DimensionError("SampleMemory::insert: channel layout mismatch");
            if (!(sample.label.layout() == ref.label.layout()))
                throw DimensionError("SampleMemory::insert: label layout mismatch");
            if (sample.positions.size() != ref.positions.size())
                throw DimensionError("SampleMemory::insert: position count mismatch");
        }
        for (TrainingSample& s : samples_)
            s.weight *= (1.0 - learning_rate_);
        if (samples_.size() >= capacity_) {
            auto victim = std::min_element(samples_.begin(), samples_.end(),
                                           [](const TrainingSample& a, const TrainingSample& b) { return a.weight < b.weight; });
            samples_.erase(victim);
        }
        sample.weight = learning_rate_;
        samples_.push_back(std::move(sample));
        double total = 0.0;
        for (const TrainingSample& s : samples_)
            total += s.weight;
        for (TrainingSample& s : samples_)
            s.weight /= total;
    }

  private:
    std::size_t capacity_;
    double learning_rate_;
    std::vector<TrainingSample> samples_;
};

} // namespace ddcf
