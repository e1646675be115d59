#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace ddcf;
using oracle::Rng;

namespace {

SpectrumLayout unit_layout(int K) { return SpectrumLayout({1.0, 1.0}, K); }

} // namespace

TEST(SpectrumLayoutTest, RejectsInvalid) {
    EXPECT_THROW(SpectrumLayout({1.0, 1.0}, -1), ArgumentError);
    EXPECT_THROW(SpectrumLayout({0.0, 1.0}, 2), ArgumentError);
    EXPECT_EQ(SpectrumLayout({1.0, 2.0}, 3).size(), 49u);
}

TEST(InterpolateTest, ConstantGridHasOnlyDc) {
    Grid g(8, 8, 5.0);
    const InterpolationKernel k(unit_layout(4), 8, 8);
    const Spectrum s = interpolate(g, k);
    // sum of 64 samples times the kernel DC coefficient
    EXPECT_NEAR(s.at(0, 0).real(), 5.0 * 64 * k.spectrum().at(0, 0).real(), 1e-12);
    for (int ky = -4; ky <= 4; ++ky)
        for (int kx = -4; kx <= 4; ++kx)
            if (kx != 0 || ky != 0) {
                // The odd-N node phases cancel exactly; for even N the
                // Nyquist row keeps a tiny alias term that is still zero here.
                EXPECT_NEAR(std::abs(s.at(kx, ky)), 0.0, 1e-10) << kx << "," << ky;
            }
    EXPECT_TRUE(is_real_symmetric(s));
}

TEST(InterpolateTest, SingleSampleEqualsKernelTimesValue) {
    Grid g(1, 1, 2.5);
    const InterpolationKernel k(unit_layout(3), 1, 1);
    const Spectrum s = interpolate(g, k);
    for (int ky = -3; ky <= 3; ++ky)
        for (int kx = -3; kx <= 3; ++kx)
            EXPECT_NEAR(std::abs(s.at(kx, ky) - 2.5 * k.spectrum().at(kx, ky)), 0.0, 1e-15);
}

TEST(InterpolateTest, KernelCoefficientsMatchDenseQuadrature) {
    for (int n : {1, 5, 8, 16})
        for (int k = 0; k <= n / 2; ++k)
            EXPECT_NEAR(InterpolationKernel::coefficient(k, n), oracle::kernel_coefficient(k, n), 1e-10) << n << "," << k;
}

TEST(InterpolateTest, MatchesSpatialInterpolationAtNodes) {
    Rng rng(11);
    Grid g(8, 8);
    for (double& v : g.values)
        v = rng.uniform();
    const InterpolationKernel k(unit_layout(4), 8, 8);
    const Spectrum s = interpolate(g, k);
    ASSERT_TRUE(is_real_symmetric(s));
    double worst = 0.0;
    for (int j = 0; j < 8; ++j)
        for (int i = 0; i < 8; ++i) {
            const Vec2 t{InterpolationKernel::node_position(i, 8), InterpolationKernel::node_position(j, 8)};
            worst = std::max(worst, std::abs(evaluate(s, t) - oracle::interpolate_at(g, 4, 4, t)));
        }
    EXPECT_LT(worst, 1e-9);
}

TEST(InterpolateTest, MismatchedKernelThrows) {
    Grid g(4, 5);
    const InterpolationKernel k(unit_layout(3), 4, 4);
    EXPECT_THROW(interpolate(g, k), DimensionError);
}

TEST(InterpolateTest, KernelSpectrumIsRealSymmetric) {
    const InterpolationKernel k(unit_layout(6), 9, 12);
    EXPECT_TRUE(is_real_symmetric(k.spectrum()));
    EXPECT_EQ(k.band(), (Band{4, 6}));
}

TEST(EvaluateTest, ZeroAndDc) {
    Spectrum z(unit_layout(3));
    EXPECT_EQ(evaluate(z, {0.3, -0.2}), 0.0);
    Spectrum dc(unit_layout(3));
    dc.at(0, 0) = 1.75;
    EXPECT_DOUBLE_EQ(evaluate(dc, {0.1, 0.4}), 1.75);
    EXPECT_DOUBLE_EQ(evaluate(dc, {-0.45, 0.0}), 1.75);
}

TEST(EvaluateTest, MatchesOversampledInverseDft) {
    Rng rng(3);
    const Spectrum s = oracle::random_real_spectrum(unit_layout(3), rng);
    const int n = 4 * 7;
    const auto grid = oracle::synthesize_grid(s, n);
    double worst = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(evaluate(s, {static_cast<double>(i) / n, static_cast<double>(j) / n}) -
                                             grid[static_cast<std::size_t>(j) * n + i]));
    EXPECT_LT(worst, 1e-10);
}

TEST(EvaluateTest, NonSymmetricSpectrumIsDomainError) {
    Spectrum s(unit_layout(2));
    s.at(1, 0) = {1.0, 0.0};
    EXPECT_THROW(evaluate(s, {0.1, 0.1}), DomainError);
}

TEST(EvaluateTest, GridMatchesPointEvaluation) {
    Rng rng(5);
    const Spectrum s = oracle::random_real_spectrum(unit_layout(4), rng);
    const Grid g = evaluate_grid(s, 12, 10);
    for (int j = 0; j < 10; ++j)
        for (int i = 0; i < 12; ++i)
            EXPECT_NEAR(g(i, j), oracle::synthesize(s, {(i - 6) / 12.0, (j - 5) / 10.0}).real(), 1e-10);
}

TEST(EvaluateTest, DerivativesMatchFiniteDifferences) {
    Rng rng(6);
    const Spectrum s = oracle::random_real_spectrum(unit_layout(3), rng);
    const Vec2 t{0.17, -0.31};
    const LocalExpansion e = evaluate_with_derivatives(s, t);
    const double h = 1e-5;
    auto f = [&](Vec2 p) { return oracle::synthesize(s, p).real(); };
    EXPECT_NEAR(e.value, f(t), 1e-10);
    EXPECT_NEAR(e.gradient.x, (f(t + Vec2{h, 0}) - f(t - Vec2{h, 0})) / (2 * h), 1e-4 * (1 + std::abs(e.gradient.x)));
    EXPECT_NEAR(e.gradient.y, (f(t + Vec2{0, h}) - f(t - Vec2{0, h})) / (2 * h), 1e-4 * (1 + std::abs(e.gradient.y)));
    const double h2 = 1e-4;
    EXPECT_NEAR(e.hxx, (f(t + Vec2{h2, 0}) - 2 * f(t) + f(t - Vec2{h2, 0})) / (h2 * h2), 1e-3 * (1 + std::abs(e.hxx)));
    EXPECT_NEAR(e.hxy,
                (f(t + Vec2{h2, h2}) - f(t + Vec2{h2, -h2}) - f(t + Vec2{-h2, h2}) + f(t - Vec2{h2, h2})) / (4 * h2 * h2),
                1e-3 * (1 + std::abs(e.hxy)));
}

TEST(ShiftTest, ZeroAndFullPeriod) {
    Rng rng(7);
    const SpectrumLayout layout({1.5, 0.8}, 4);
    const Spectrum s = oracle::random_real_spectrum(layout, rng);
    const Spectrum a = shift(s, {0.0, 0.0});
    const Spectrum b = shift(s, {1.5, 0.8});
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(a.coeffs()[i], s.coeffs()[i]);
        EXPECT_LT(std::abs(b.coeffs()[i] - s.coeffs()[i]), 1e-12);
    }
}

TEST(ShiftTest, ShiftTheoremAtRandomPoints) {
    Rng rng(8);
    const SpectrumLayout layout({3.0, 2.0}, 4);
    const Spectrum s = oracle::random_real_spectrum(layout, rng);
    const Vec2 p{1.3, -0.7};
    const Spectrum moved = shift(s, p);
    for (int i = 0; i < 20; ++i) {
        const Vec2 t{rng.uniform(-3, 3), rng.uniform(-2, 2)};
        EXPECT_NEAR(evaluate(moved, t), oracle::synthesize(s, t - p).real(), 1e-9);
    }
}

TEST(InnerTest, ZeroAndOrthogonal) {
    Spectrum z(unit_layout(2));
    EXPECT_EQ(norm2(z), 0.0);
    Spectrum a(unit_layout(2)), b(unit_layout(2));
    a.at(1, 0) = 1.0;
    b.at(0, 1) = 1.0;
    EXPECT_EQ(inner(a, b), Complex(0.0));
    EXPECT_THROW(inner(a, Spectrum(unit_layout(3))), DimensionError);
}

TEST(InnerTest, NormMatchesQuadrature) {
    Rng rng(9);
    const SpectrumLayout layout({2.0, 3.0}, 4);
    const Spectrum s = oracle::random_real_spectrum(layout, rng);
    // Riemann sum of f^2 over one period, divided by T1 T2
    const int n = 64;
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double v = oracle::synthesize(s, {2.0 * i / n, 3.0 * j / n}).real();
            acc += v * v;
        }
    acc /= n * n;
    EXPECT_NEAR(norm2(s), acc, 1e-4 * acc);
}

TEST(PointwiseMulTest, OnesZeroAndScalarLoop) {
    Rng rng(10);
    const SpectrumLayout layout = unit_layout(3);
    const Spectrum a = oracle::random_complex_spectrum(layout, rng);
    Spectrum ones(layout);
    for (Complex& c : ones.coeffs())
        c = 1.0;
    const Spectrum p = pointwise_mul(a, ones);
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(p.coeffs()[i], a.coeffs()[i]);
    EXPECT_EQ(norm2(pointwise_mul(Spectrum(layout), a)), 0.0);
    const Spectrum b = oracle::random_complex_spectrum(layout, rng);
    const Spectrum ab = pointwise_mul(a, b);
    for (int ky = -3; ky <= 3; ++ky)
        for (int kx = -3; kx <= 3; ++kx) {
            const Complex x = a.at(kx, ky), y = b.at(kx, ky);
            const Complex ref(x.real() * y.real() - x.imag() * y.imag(), x.real() * y.imag() + x.imag() * y.real());
            EXPECT_LT(std::abs(ab.at(kx, ky) - ref), 1e-14);
        }
    EXPECT_THROW(pointwise_mul(a, Spectrum(unit_layout(2))), DimensionError);
}

TEST(SpectralInvariants, GroupLawAndSymmetryPreservation) {
    Rng rng(12);
    for (int trial = 0; trial < 25; ++trial) {
        const SpectrumLayout layout({rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)}, rng.integer(0, 6));
        const Spectrum s = oracle::random_real_spectrum(layout, rng);
        const Vec2 p{rng.uniform(-2, 2), rng.uniform(-2, 2)}, q{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Spectrum a = shift(shift(s, p), q), b = shift(s, p + q);
        for (std::size_t i = 0; i < s.size(); ++i)
            EXPECT_LT(std::abs(a.coeffs()[i] - b.coeffs()[i]), 1e-12);
        EXPECT_TRUE(is_real_symmetric(shift(s, p)));
        const Spectrum t = oracle::random_real_spectrum(layout, rng);
        EXPECT_TRUE(is_real_symmetric(pointwise_mul(s, t)));
        EXPECT_TRUE(is_real_symmetric(s * Complex(0.7) + t));
    }
}

TEST(ConvolutionTest, ProductOfFunctions) {
    Rng rng(13);
    const Spectrum a = oracle::random_real_spectrum(unit_layout(3), rng);
    const Spectrum b = oracle::random_real_spectrum(unit_layout(2), rng);
    const Spectrum c = convolve(a, b);
    for (int i = 0; i < 10; ++i) {
        const Vec2 t{rng.uniform(), rng.uniform()};
        EXPECT_NEAR(evaluate(c, t), oracle::synthesize(a, t).real() * oracle::synthesize(b, t).real(), 1e-10);
    }
}

TEST(ConvolutionTest, CorrelateIsAdjointOfConvolve) {
    Rng rng(14);
    const Spectrum w = oracle::random_real_spectrum(unit_layout(2), rng);
    const Spectrum f = oracle::random_complex_spectrum(unit_layout(3), rng);
    const Spectrum g = oracle::random_complex_spectrum(unit_layout(5), rng);
    const Complex lhs = inner(convolve(f, w), g);
    const Complex rhs = inner(f, correlate_truncated(g, w, 3));
    EXPECT_LT(std::abs(lhs - rhs), 1e-11 * (1 + std::abs(lhs)));
}
