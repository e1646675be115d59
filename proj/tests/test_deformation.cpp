#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace ddcf;
using oracle::Rng;

namespace {

DeformationState state_for(const std::vector<Vec2>& p1, const std::vector<Vec2>& pc, double lambda,
                           TransformMode mode = TransformMode::affine) {
    DeformationState st;
    st.initial = p1;
    st.current = pc;
    st.lambda = lambda;
    st.mode = mode;
    return st;
}

// eps1 + eps3 through the public objective, with the sample's positions
// replaced by the state's.
double energy(const FilterCoefficients& f, TrainingSample s, const DeformationState& st, const SpatialRegularizer& reg) {
    s.positions = st.current;
    const std::vector<TrainingSample> one{s};
    const auto t = objective(f, one, reg, st.initial, st.current, st.transform, st.lambda);
    return t.data + t.deformation;
}

std::vector<Vec2> random_points(Rng& rng, int M, double r) {
    std::vector<Vec2> p;
    for (int m = 0; m < M; ++m)
        p.push_back({rng.uniform(-r, r), rng.uniform(-r, r)});
    return p;
}

} // namespace

TEST(GradPositionsTest, ZeroFilterAtPriorIsZero) {
    Rng rng(51);
    auto in = oracle::random_instance(rng, 1, 3, 2, 3);
    const auto p1 = random_points(rng, 3, 0.3);
    const Mat2 R{1.1, 0.2, -0.1, 0.95};
    std::vector<Vec2> pc;
    for (Vec2 p : p1)
        pc.push_back(R * p);
    auto st = state_for(p1, pc, 2.0);
    st.transform = R;
    for (Vec2 g : grad_positions(FilterCoefficients(in.shape), in.samples[0], st)) {
        EXPECT_EQ(g.x, 0.0);
        EXPECT_EQ(g.y, 0.0);
    }
}

TEST(GradPositionsTest, ZeroFilterIsPriorGradient) {
    Rng rng(52);
    auto in = oracle::random_instance(rng, 1, 2, 1, 2);
    const auto p1 = random_points(rng, 2, 0.3), pc = random_points(rng, 2, 0.3);
    const auto st = state_for(p1, pc, 1e6);
    const auto g = grad_positions(FilterCoefficients(in.shape), in.samples[0], st);
    for (int m = 0; m < 2; ++m) {
        EXPECT_EQ(g[m].x, 2e6 * (pc[m].x - p1[m].x));
        EXPECT_EQ(g[m].y, 2e6 * (pc[m].y - p1[m].y));
    }
}

TEST(GradPositionsTest, MatchesCentralDifferences) {
    Rng rng(53);
    auto in = oracle::random_instance(rng, 1, 3, 2, 4);
    const FilterCoefficients f = oracle::random_filter(in.shape, rng);
    auto st = state_for(random_points(rng, 3, 0.25), random_points(rng, 3, 0.25), 0.3);
    st.transform = {0.9, 0.1, 0.05, 1.1};
    const auto g = grad_positions(f, in.samples[0], st);
    const double h = 1e-5;
    for (int m = 0; m < 3; ++m)
        for (int axis = 0; axis < 2; ++axis) {
            auto plus = st, minus = st;
            (axis ? plus.current[m].y : plus.current[m].x) += h;
            (axis ? minus.current[m].y : minus.current[m].x) -= h;
            const double fd = (energy(f, in.samples[0], plus, in.reg) - energy(f, in.samples[0], minus, in.reg)) / (2 * h);
            const double an = axis ? g[m].y : g[m].x;
            EXPECT_LT(std::abs(an - fd), 1e-4 * std::abs(fd)) << m << "," << axis;
        }
}

TEST(GradPositionsTest, DimensionMismatchThrows) {
    Rng rng(54);
    auto in = oracle::random_instance(rng, 1, 2, 1, 2);
    const auto st = state_for(random_points(rng, 3, 0.2), random_points(rng, 3, 0.2), 1.0);
    EXPECT_THROW(grad_positions(FilterCoefficients(in.shape), in.samples[0], st), DimensionError);
}

TEST(EstimateTransformTest, IdentityAndScaling) {
    const std::vector<Vec2> p1{{1, 0}, {0, 1}, {-1, 0.5}, {0.3, -2}};
    const Mat2 I = estimate_transform(p1, p1);
    EXPECT_NEAR(I.a11, 1.0, 1e-8);
    EXPECT_NEAR(I.a12, 0.0, 1e-8);
    EXPECT_NEAR(I.a21, 0.0, 1e-8);
    EXPECT_NEAR(I.a22, 1.0, 1e-8);
    std::vector<Vec2> p2;
    for (Vec2 p : p1)
        p2.push_back(2.0 * p);
    const Mat2 S = estimate_transform(p1, p2);
    EXPECT_NEAR(S.a11, 2.0, 1e-8);
    EXPECT_NEAR(S.a12, 0.0, 1e-8);
    EXPECT_NEAR(S.a21, 0.0, 1e-8);
    EXPECT_NEAR(S.a22, 2.0, 1e-8);
}

TEST(EstimateTransformTest, RecoversPlantedTransform) {
    Rng rng(55);
    const std::vector<Vec2> p1{{-1, -1}, {1, -1}, {-1, 1}, {1.2, 0.9}};
    for (int trial = 0; trial < 20; ++trial) {
        const Mat2 R{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        std::vector<Vec2> pc;
        for (Vec2 p : p1)
            pc.push_back(R * p);
        const Mat2 E = estimate_transform(p1, pc);
        EXPECT_LT(std::max({std::abs(E.a11 - R.a11), std::abs(E.a12 - R.a12), std::abs(E.a21 - R.a21),
                            std::abs(E.a22 - R.a22)}),
                  1e-8);
    }
}

TEST(EstimateTransformTest, IsLeastSquaresOptimal) {
    Rng rng(56);
    const auto p1 = random_points(rng, 5, 1.0), pc = random_points(rng, 5, 1.0);
    const Mat2 R = estimate_transform(p1, pc);
    auto cost = [&](const Mat2& M) {
        double acc = 0.0;
        for (std::size_t m = 0; m < p1.size(); ++m) {
            const Vec2 r = pc[m] - M * p1[m];
            acc += dot(r, r);
        }
        return acc;
    };
    const double c0 = cost(R);
    for (int k = 0; k < 8; ++k) {
        Mat2 D{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        const double n = std::sqrt(D.a11 * D.a11 + D.a12 * D.a12 + D.a21 * D.a21 + D.a22 * D.a22);
        const Mat2 P{R.a11 + 1e-3 * D.a11 / n, R.a12 + 1e-3 * D.a12 / n, R.a21 + 1e-3 * D.a21 / n,
                     R.a22 + 1e-3 * D.a22 / n};
        EXPECT_GE(cost(P), c0);
    }
}

TEST(EstimateTransformTest, DegenerateInputs) {
    const std::vector<Vec2> zero(3, Vec2{0, 0});
    const std::vector<Vec2> pc{{1, 0}, {0, 1}, {1, 1}};
    EXPECT_THROW(estimate_transform(zero, pc), DegenerateConfigurationError);
    const std::vector<Vec2> one{{1, 0}};
    EXPECT_THROW(estimate_transform(one, one), ArgumentError);
    // collinear: the ridge keeps R finite
    const std::vector<Vec2> line{{1, 1}, {2, 2}, {-1, -1}};
    const Mat2 R = estimate_transform(line, line);
    EXPECT_TRUE(std::isfinite(R.a11) && std::isfinite(R.a22));
    for (Vec2 p : line) {
        const Vec2 q = R * p;
        EXPECT_NEAR(q.x, p.x, 1e-6);
        EXPECT_NEAR(q.y, p.y, 1e-6);
    }
}

TEST(RegEnergyTest, Examples) {
    auto st = state_for({{0, 0}}, {{3, 4}}, 2.0);
    EXPECT_DOUBLE_EQ(reg_energy(st), 50.0);
    st.lambda = 0.0;
    EXPECT_EQ(reg_energy(st), 0.0);
    auto at_prior = state_for({{1, 2}, {-1, 0.5}}, {{1, 2}, {-1, 0.5}}, 7.0);
    EXPECT_EQ(reg_energy(at_prior), 0.0);
}

TEST(BBDescentTest, ZeroGradientReturnsUnchanged) {
    Rng rng(57);
    auto in = oracle::random_instance(rng, 1, 2, 1, 2);
    const auto p1 = random_points(rng, 2, 0.3);
    const auto st = state_for(p1, p1, 1.0);
    const auto out = bb_descent(FilterCoefficients(in.shape), in.samples[0], st, BBParams{});
    EXPECT_EQ(out.current, st.current);
    EXPECT_EQ(out.transform, st.transform);
}

TEST(BBDescentTest, PureQuadraticConvergesToPrior) {
    Rng rng(58);
    auto in = oracle::random_instance(rng, 1, 3, 1, 2);
    const auto p1 = random_points(rng, 3, 0.3);
    const auto st = state_for(p1, random_points(rng, 3, 0.3), 0.7, TransformMode::identity);
    BBParams params;
    params.max_iterations = 20;
    params.initial_step = 0.1;
    const auto out = bb_descent(FilterCoefficients(in.shape), in.samples[0], st, params);
    for (int m = 0; m < 3; ++m)
        EXPECT_LT(norm(out.current[m] - p1[m]), 1e-8);
    EXPECT_EQ(out.transform, Mat2::identity());
}

// A sample that is the training sample translated by d: the descent on a
// single sub-filter should recover d.
TEST(BBDescentTest, RecoversPlantedShift) {
    Rng rng(59);
    const SpectrumLayout layout({1.0, 1.0}, 8);
    FilterShape shape{layout, 1, {Band{8, 8}}};
    TrainingSample train;
    train.channels.push_back(oracle::random_real_spectrum(layout, rng, 0.03));
    train.label = gaussian_label(layout, {0.06, 0.06});
    train.weight = 1.0;
    train.positions = {{0.0, 0.0}};
    const std::vector<TrainingSample> mem{train};
    const SpatialRegularizer reg = SpatialRegularizer::per_subfilter(
        {quadratic_regularizer(layout.period, 2, 1e-3, 1e-2, {0.25, 0.25})}, 1);
    const auto f = solve_coefficients(shape, mem, reg, {300, 1e-10}).coefficients;

    const Vec2 planted{0.04, -0.03};
    TrainingSample moved = train;
    moved.channels[0] = shift(train.channels[0], planted);
    auto st = state_for({{0.0, 0.0}}, {{0.0, 0.0}}, 0.0, TransformMode::identity);
    BBParams params;
    params.max_iterations = 50;
    params.initial_step = 1e-3;
    params.max_step = 1.0;
    params.min_step = 1e-6;
    const auto out = bb_descent(f, moved, st, params);
    // features moved by +planted; the score is shifted by +p, so p = -planted
    EXPECT_LT(norm(out.current[0] + planted), 0.01);
}

TEST(BBDescentTest, SafeguardNeverIncreasesObjective) {
    Rng rng(60);
    for (int trial = 0; trial < 20; ++trial) {
        auto in = oracle::random_instance(rng, 1, 3, 2, 4);
        const FilterCoefficients f = oracle::random_filter(in.shape, rng);
        auto st = state_for(random_points(rng, 3, 0.3), random_points(rng, 3, 0.3), rng.uniform(0.0, 2.0));
        BBParams params;
        params.initial_step = rng.uniform(0.01, 5.0); // large steps provoke non-monotone BB
        const auto out = bb_descent(f, in.samples[0], st, params);
        EXPECT_LE(energy(f, in.samples[0], out, in.reg), energy(f, in.samples[0], st, in.reg));
    }
}

TEST(BBDescentTest, IdentityModeKeepsIdentityExactly) {
    Rng rng(61);
    auto in = oracle::random_instance(rng, 1, 3, 1, 3);
    const FilterCoefficients f = oracle::random_filter(in.shape, rng);
    auto st = state_for(random_points(rng, 3, 0.3), random_points(rng, 3, 0.3), 0.5, TransformMode::identity);
    for (int k = 0; k < 5; ++k) {
        st = bb_descent(f, in.samples[0], st, BBParams{});
        EXPECT_EQ(st.transform, Mat2::identity());
    }
}

TEST(BBDescentTest, NanGradientReturnsInput) {
    Rng rng(62);
    auto in = oracle::random_instance(rng, 1, 2, 1, 2);
    FilterCoefficients f = oracle::random_filter(in.shape, rng);
    f.at(1, 0).at(1, 1) = std::nan("");
    const auto st = state_for(random_points(rng, 2, 0.3), random_points(rng, 2, 0.3), 1.0);
    const auto out = bb_descent(f, in.samples[0], st, BBParams{});
    EXPECT_EQ(out.current, st.current);
}

TEST(BBDescentTest, FixedPositionsDoNotMove) {
    Rng rng(63);
    auto in = oracle::random_instance(rng, 1, 3, 1, 3);
    const FilterCoefficients f = oracle::random_filter(in.shape, rng);
    auto st = state_for({{0, 0}, {0.2, 0.1}, {-0.2, 0.1}}, {{0, 0}, {0.25, 0.05}, {-0.1, 0.2}}, 0.5);
    st.fixed = {true, false, false};
    const auto out = bb_descent(f, in.samples[0], st, BBParams{});
    EXPECT_EQ(out.current[0], (Vec2{0, 0}));
}

TEST(BBParamsTest, Validation) {
    BBParams p;
    p.max_iterations = 0;
    EXPECT_THROW(p.validate(), ArgumentError);
    p = {};
    p.min_step = 2.0;
    p.max_step = 1.0;
    EXPECT_THROW(p.validate(), ArgumentError);
}
