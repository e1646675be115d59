#pragma once

// Truncated 2-D Fourier series of periodic functions and the primitives the
// training and detection code builds on: interpolation of discrete samples,
// translation, synthesis, inner products and spectral convolution.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "types.hpp"

namespace ddcf {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Period of the continuous domain and the truncation index K; coefficients
// are indexed by (kx, ky) in [-K, K]^2.
struct SpectrumLayout {
    Vec2 period{1.0, 1.0};
    int K = 0;

    SpectrumLayout() = default;
    SpectrumLayout(Vec2 period_, int K_) : period(period_), K(K_) {
        if (K < 0)
            throw ArgumentError("SpectrumLayout: K must be >= 0");
        if (!(period.x > 0.0) || !(period.y > 0.0))
            throw ArgumentError("SpectrumLayout: periods must be positive");
    }

    int side() const { return 2 * K + 1; }
    std::size_t size() const { return static_cast<std::size_t>(side()) * static_cast<std::size_t>(side()); }

    friend bool operator==(const SpectrumLayout&, const SpectrumLayout&) = default;
};

// Per-channel truncation (kx_max, ky_max). Coefficients outside the band are
// held at zero inside a layout with a larger K.
struct Band {
    int kx = 0;
    int ky = 0;

    bool contains(int x, int y) const { return std::abs(x) <= kx && std::abs(y) <= ky; }
    friend bool operator==(Band, Band) = default;
};

class Spectrum {
  public:
    Spectrum() = default;
    explicit Spectrum(const SpectrumLayout& layout) : layout_(layout), coeffs_(layout.size()) {}

    const SpectrumLayout& layout() const { return layout_; }
    int K() const { return layout_.K; }
    std::size_t size() const { return coeffs_.size(); }

    std::size_t index(int kx, int ky) const {
        return static_cast<std::size_t>(ky + layout_.K) * static_cast<std::size_t>(layout_.side()) +
               static_cast<std::size_t>(kx + layout_.K);
    }
    Complex& at(int kx, int ky) { return coeffs_[index(kx, ky)]; }
    const Complex& at(int kx, int ky) const { return coeffs_[index(kx, ky)]; }

    std::span<Complex> coeffs() { return coeffs_; }
    std::span<const Complex> coeffs() const { return coeffs_; }

    Spectrum& operator+=(const Spectrum& o) {
        check_same(o, "Spectrum::operator+=");
        for (std::size_t i = 0; i < coeffs_.size(); ++i)
            coeffs_[i] += o.coeffs_[i];
        return *this;
    }
    Spectrum& operator-=(const Spectrum& o) {
        check_same(o, "Spectrum::operator-=");
        for (std::size_t i = 0; i < coeffs_.size(); ++i)
            coeffs_[i] -= o.coeffs_[i];
        return *this;
    }
    Spectrum& operator*=(Complex s) {
        for (auto& c : coeffs_)
            c *= s;
        return *this;
    }

    friend Spectrum operator+(Spectrum a, const Spectrum& b) { return a += b; }
    friend Spectrum operator-(Spectrum a, const Spectrum& b) { return a -= b; }
    friend Spectrum operator*(Spectrum a, Complex s) { return a *= s; }
    friend Spectrum operator*(Complex s, Spectrum a) { return a *= s; }

    // this += s * o
    void axpy(Complex s, const Spectrum& o) {
        check_same(o, "Spectrum::axpy");
        for (std::size_t i = 0; i < coeffs_.size(); ++i)
            coeffs_[i] += s * o.coeffs_[i];
    }

    void check_same(const Spectrum& o, const char* where) const {
        if (!(layout_ == o.layout_))
            throw DimensionError(std::string(where) + ": layout mismatch");
    }

  private:
    SpectrumLayout layout_;
    std::vector<Complex> coeffs_;
};

namespace detail {

// exp(sign * i 2 pi k u) for k in [-K, K].
inline std::vector<Complex> phase_row(int K, double u, double sign) {
    std::vector<Complex> row(static_cast<std::size_t>(2 * K + 1));
    for (int k = -K; k <= K; ++k)
        row[static_cast<std::size_t>(k + K)] = std::polar(1.0, sign * kTwoPi * k * u);
    return row;
}

} // namespace detail

inline bool is_real_symmetric(const Spectrum& s, double tol = 1e-12) {
    const int K = s.K();
    for (int ky = -K; ky <= K; ++ky)
        for (int kx = -K; kx <= K; ++kx) {
            const Complex a = s.at(kx, ky);
            const Complex b = std::conj(s.at(-kx, -ky));
            if (std::abs(a - b) > tol * (1.0 + std::abs(a)))
                return false;
        }
    return true;
}

// Projects onto the real-symmetric subspace: c[k] <- (c[k] + conj(c[-k])) / 2.
inline Spectrum symmetrize(const Spectrum& s) {
    Spectrum out(s.layout());
    const int K = s.K();
    for (int ky = -K; ky <= K; ++ky)
        for (int kx = -K; kx <= K; ++kx)
            out.at(kx, ky) = 0.5 * (s.at(kx, ky) + std::conj(s.at(-kx, -ky)));
    return out;
}

// Zero-pads or truncates to a new K with the same period.
inline Spectrum resize(const Spectrum& s, int K) {
    Spectrum out(SpectrumLayout(s.layout().period, K));
    const int common = std::min(K, s.K());
    for (int ky = -common; ky <= common; ++ky)
        for (int kx = -common; kx <= common; ++kx)
            out.at(kx, ky) = s.at(kx, ky);
    return out;
}

inline void apply_band(Spectrum& s, Band band) {
    const int K = s.K();
    for (int ky = -K; ky <= K; ++ky)
        for (int kx = -K; kx <= K; ++kx)
            if (!band.contains(kx, ky))
                s.at(kx, ky) = 0.0;
}

inline Complex inner(const Spectrum& a, const Spectrum& b) {
    a.check_same(b, "inner");
    Complex acc = 0.0;
    const auto ca = a.coeffs();
    const auto cb = b.coeffs();
    for (std::size_t i = 0; i < ca.size(); ++i)
        acc += std::conj(cb[i]) * ca[i];
    return acc;
}

inline double norm2(const Spectrum& a) {
    double acc = 0.0;
    for (const Complex& c : a.coeffs())
        acc += std::norm(c);
    return acc;
}

inline Spectrum pointwise_mul(const Spectrum& a, const Spectrum& b) {
    a.check_same(b, "pointwise_mul");
    Spectrum out(a.layout());
    const auto ca = a.coeffs();
    const auto cb = b.coeffs();
    auto co = out.coeffs();
    for (std::size_t i = 0; i < ca.size(); ++i)
        co[i] = ca[i] * cb[i];
    return out;
}

// Spectrum of the periodic function t -> f(t - p).
inline Spectrum shift(const Spectrum& s, Vec2 p) {
    const int K = s.K();
    const auto bx = detail::phase_row(K, p.x / s.layout().period.x, -1.0);
    const auto by = detail::phase_row(K, p.y / s.layout().period.y, -1.0);
    Spectrum out(s.layout());
    for (int ky = -K; ky <= K; ++ky)
        for (int kx = -K; kx <= K; ++kx)
            out.at(kx, ky) = by[ky + K] * bx[kx + K] * s.at(kx, ky);
    return out;
}

// Shift factors exp(-i 2 pi (px kx / Tx + py ky / Ty)) as a spectrum.
inline Spectrum shift_factors(const SpectrumLayout& layout, Vec2 p) {
    const int K = layout.K;
    const auto bx = detail::phase_row(K, p.x / layout.period.x, -1.0);
    const auto by = detail::phase_row(K, p.y / layout.period.y, -1.0);
    Spectrum out(layout);
    for (int ky = -K; ky <= K; ++ky)
        for (int kx = -K; kx <= K; ++kx)
            out.at(kx, ky) = by[ky + K] * bx[kx + K];
    return out;
}

namespace detail {

inline Complex synthesize(const Spectrum& s, Vec2 t) {
    const int K = s.K();
    const auto ex = phase_row(K, t.x / s.layout().period.x, 1.0);
    const auto ey = phase_row(K, t.y / s.layout().period.y, 1.0);
    Complex acc = 0.0;
    for (int ky = -K; ky <= K; ++ky) {
        Complex row = 0.0;
        for (int kx = -K; kx <= K; ++kx)
            row += s.at(kx, ky) * ex[kx + K];
        acc += row * ey[ky + K];
    }
    return acc;
}

} // namespace detail

// Value of the represented real function at t.
inline double evaluate(const Spectrum& s, Vec2 t) {
    double scale = 0.0;
    for (const Complex& c : s.coeffs())
        scale = std::max(scale, std::abs(c));
    if (!is_real_symmetric(s, 1e-9 * std::max(1.0, scale)))
        throw DomainError("evaluate: spectrum is not real-symmetric");
    const Complex v = detail::synthesize(s, t);
    if (std::abs(v.imag()) >= 1e-8 * (1.0 + std::abs(v.real())))
        throw DomainError("evaluate: synthesized value has a non-negligible imaginary part");
    return v.real();
}

struct LocalExpansion {
    double value = 0.0;
    Vec2 gradient;
    double hxx = 0.0, hxy = 0.0, hyy = 0.0;
};

// Value, gradient and Hessian of the trigonometric polynomial at t.
inline LocalExpansion evaluate_with_derivatives(const Spectrum& s, Vec2 t) {
    const int K = s.K();
    const Vec2 T = s.layout().period;
    const auto ex = detail::phase_row(K, t.x / T.x, 1.0);
    const auto ey = detail::phase_row(K, t.y / T.y, 1.0);
    const double wx = kTwoPi / T.x;
    const double wy = kTwoPi / T.y;
    Complex v = 0.0, gx = 0.0, gy = 0.0, hxx = 0.0, hxy = 0.0, hyy = 0.0;
    for (int ky = -K; ky <= K; ++ky)
        for (int kx = -K; kx <= K; ++kx) {
            const Complex term = s.at(kx, ky) * ex[kx + K] * ey[ky + K];
            const double fx = wx * kx;
            const double fy = wy * ky;
            v += term;
            gx += Complex(0.0, fx) * term;
            gy += Complex(0.0, fy) * term;
            hxx -= fx * fx * term;
            hxy -= fx * fy * term;
            hyy -= fy * fy * term;
        }
    return {v.real(), {gx.real(), gy.real()}, hxx.real(), hxy.real(), hyy.real()};
}

// Evaluates on an nx-by-ny grid covering one period, centered so that cell
// (nx/2, ny/2) sits at t = 0: t_i = (i - nx/2) Tx / nx.
inline Grid evaluate_grid(const Spectrum& s, int nx, int ny) {
    if (nx < 1 || ny < 1)
        throw ArgumentError("evaluate_grid: grid must be nonempty");
    const int K = s.K();
    const int side = 2 * K + 1;
    std::vector<std::vector<Complex>> ex(static_cast<std::size_t>(nx));
    for (int i = 0; i < nx; ++i)
        ex[i] = detail::phase_row(K, static_cast<double>(i - nx / 2) / nx, 1.0);
    std::vector<Complex> rows(static_cast<std::size_t>(side) * nx);
    for (int ky = -K; ky <= K; ++ky)
        for (int i = 0; i < nx; ++i) {
            Complex acc = 0.0;
            for (int kx = -K; kx <= K; ++kx)
                acc += s.at(kx, ky) * ex[i][kx + K];
            rows[static_cast<std::size_t>(ky + K) * nx + i] = acc;
        }
    Grid out(nx, ny);
    for (int j = 0; j < ny; ++j) {
        const auto ey = detail::phase_row(K, static_cast<double>(j - ny / 2) / ny, 1.0);
        for (int i = 0; i < nx; ++i) {
            Complex acc = 0.0;
            for (int ky = -K; ky <= K; ++ky)
                acc += rows[static_cast<std::size_t>(ky + K) * nx + i] * ey[ky + K];
            out(i, j) = acc.real();
        }
    }
    return out;
}

// Full (untruncated) spectral convolution; result has K = Ka + Kb.
inline Spectrum convolve(const Spectrum& a, const Spectrum& b) {
    if (!(a.layout().period == b.layout().period))
        throw DimensionError("convolve: period mismatch");
    const int Ka = a.K(), Kb = b.K();
    Spectrum out(SpectrumLayout(a.layout().period, Ka + Kb));
    for (int ly = -Kb; ly <= Kb; ++ly)
        for (int lx = -Kb; lx <= Kb; ++lx) {
            const Complex w = b.at(lx, ly);
            if (w == Complex(0.0))
                continue;
            for (int ky = -Ka; ky <= Ka; ++ky)
                for (int kx = -Ka; kx <= Ka; ++kx)
                    out.at(kx + lx, ky + ly) += w * a.at(kx, ky);
        }
    return out;
}

// Adjoint of g -> convolve(g, w) restricted back to truncation K:
// out[k] = sum_l conj(w[l]) g[k + l], |k| <= K.
inline Spectrum correlate_truncated(const Spectrum& g, const Spectrum& w, int K) {
    if (!(g.layout().period == w.layout().period))
        throw DimensionError("correlate_truncated: period mismatch");
    const int Kw = w.K();
    if (g.K() < K + Kw)
        throw DimensionError("correlate_truncated: input spectrum too small");
    Spectrum out(SpectrumLayout(g.layout().period, K));
    for (int ly = -Kw; ly <= Kw; ++ly)
        for (int lx = -Kw; lx <= Kw; ++lx) {
            const Complex wc = std::conj(w.at(lx, ly));
            if (wc == Complex(0.0))
                continue;
            for (int ky = -K; ky <= K; ++ky)
                for (int kx = -K; kx <= K; ++kx)
                    out.at(kx, ky) += wc * g.at(kx + lx, ky + ly);
        }
    return out;
}

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1] via Newton iteration on P_n.
template <int N>
struct GaussLegendre {
    std::array<double, N> nodes{};
    std::array<double, N> weights{};

    GaussLegendre() {
        for (int i = 0; i < N; ++i) {
            double x = std::cos(kPi * (i + 0.75) / (N + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= N; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16)
                    break;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

} // namespace detail

// Separable cubic convolution kernel (a = -0.75) scaled to the sample spacing,
// represented by its Fourier coefficients at a given layout. Coefficients
// outside the channel's band (floor(N/2) per axis) are zero.
class InterpolationKernel {
  public:
    static constexpr double kCubicA = -0.75;

    InterpolationKernel(const SpectrumLayout& layout, int samples_x, int samples_y)
        : layout_(layout), samples_x_(samples_x), samples_y_(samples_y), spectrum_(layout) {
        if (samples_x < 1 || samples_y < 1)
            throw DimensionError("InterpolationKernel: sample counts must be >= 1");
        band_ = {std::min(layout.K, samples_x / 2), std::min(layout.K, samples_y / 2)};
        std::vector<double> bx(static_cast<std::size_t>(band_.kx) + 1), by(static_cast<std::size_t>(band_.ky) + 1);
        for (int k = 0; k <= band_.kx; ++k)
            bx[k] = coefficient(k, samples_x);
        for (int k = 0; k <= band_.ky; ++k)
            by[k] = coefficient(k, samples_y);
        for (int ky = -band_.ky; ky <= band_.ky; ++ky)
            for (int kx = -band_.kx; kx <= band_.kx; ++kx)
                spectrum_.at(kx, ky) = bx[std::abs(kx)] * by[std::abs(ky)];
    }

    const SpectrumLayout& layout() const { return layout_; }
    const Spectrum& spectrum() const { return spectrum_; }
    int samples_x() const { return samples_x_; }
    int samples_y() const { return samples_y_; }
    Band band() const { return band_; }

    static double cubic(double u) {
        const double a = kCubicA;
        const double x = std::abs(u);
        if (x <= 1.0)
            return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
        if (x < 2.0)
            return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
        return 0.0;
    }

    // Fourier coefficient k of the kernel for a period holding n samples:
    // (1/n) * integral of cubic(u) cos(2 pi k u / n) over [-2, 2].
    static double coefficient(int k, int n) {
        static const detail::GaussLegendre<16> gl;
        double acc = 0.0;
        for (int piece = 0; piece < 2; ++piece) {
            const double mid = piece + 0.5;
            for (int i = 0; i < 16; ++i) {
                const double u = mid + 0.5 * gl.nodes[i];
                acc += 0.5 * gl.weights[i] * cubic(u) * std::cos(kTwoPi * k * u / n);
            }
        }
        return 2.0 * acc / n;
    }

    // Continuous position of sample n along an axis holding `count` samples,
    // in period units: nodes are centered on t = 0.
    static double node_position(int n, int count) { return (n - 0.5 * (count - 1)) / count; }

  private:
    SpectrumLayout layout_;
    int samples_x_;
    int samples_y_;
    Band band_;
    Spectrum spectrum_;
};

// Fourier coefficients of J{x}(t) = sum_n x[n] b(t - t_n): the node-phased
// DFT of the samples times the kernel spectrum.
inline Spectrum interpolate(const Grid& samples, const InterpolationKernel& kernel) {
    if (samples.width != kernel.samples_x() || samples.height != kernel.samples_y())
        throw DimensionError("interpolate: sample grid does not match kernel resolution");
    if (samples.empty())
        throw DimensionError("interpolate: empty sample grid");
    const Band band = kernel.band();
    const int nx = samples.width, ny = samples.height;

    // Row transform: partial[y][kx] = sum_x x[x, y] exp(-i 2 pi kx t_x)
    std::vector<std::vector<Complex>> ex(static_cast<std::size_t>(nx));
    for (int x = 0; x < nx; ++x)
        ex[x] = detail::phase_row(band.kx, InterpolationKernel::node_position(x, nx), -1.0);
    std::vector<Complex> partial(static_cast<std::size_t>(ny) * (2 * band.kx + 1));
    for (int y = 0; y < ny; ++y)
        for (int kx = -band.kx; kx <= band.kx; ++kx) {
            Complex acc = 0.0;
            for (int x = 0; x < nx; ++x)
                acc += samples(x, y) * ex[x][kx + band.kx];
            partial[static_cast<std::size_t>(y) * (2 * band.kx + 1) + (kx + band.kx)] = acc;
        }

    Spectrum out(kernel.layout());
    std::vector<std::vector<Complex>> ey(static_cast<std::size_t>(ny));
    for (int y = 0; y < ny; ++y)
        ey[y] = detail::phase_row(band.ky, InterpolationKernel::node_position(y, ny), -1.0);
    for (int ky = -band.ky; ky <= band.ky; ++ky)
        for (int kx = -band.kx; kx <= band.kx; ++kx) {
            Complex acc = 0.0;
            for (int y = 0; y < ny; ++y)
                acc += partial[static_cast<std::size_t>(y) * (2 * band.kx + 1) + (kx + band.kx)] * ey[y][ky + band.ky];
            out.at(kx, ky) = acc * kernel.spectrum().at(kx, ky);
        }
    return out;
}

} // namespace ddcf
