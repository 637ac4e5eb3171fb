#include "whf/flowfield.hpp"
#include "whf/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace whf;

namespace {

constexpr double pi = std::numbers::pi;

Mat2 fd_jacobian(const FlowSpec& f, double t, Vec2 x, double h) {
    const Vec2 dx = (1.0 / (2.0 * h)) * (eval_flow(f, t, x + Vec2{h, 0.0}) - eval_flow(f, t, x - Vec2{h, 0.0}));
    const Vec2 dy = (1.0 / (2.0 * h)) * (eval_flow(f, t, x + Vec2{0.0, h}) - eval_flow(f, t, x - Vec2{0.0, h}));
    return {dx.x, dy.x, dx.y, dy.y};
}

Vec2 fd_time(const FlowSpec& f, double t, Vec2 x, double h) {
    return (1.0 / (2.0 * h)) * (eval_flow(f, t + h, x) - eval_flow(f, t - h, x));
}

} // namespace

TEST(FlowField, CircleValue) {
    const Vec2 w = eval_flow(FlowSpec::of(FlowKind::Circle), 0.0, {1.0, 2.0});
    EXPECT_EQ(w.x, -2.0);
    EXPECT_EQ(w.y, 1.0);
}

TEST(FlowField, AttractorVanishesAtOrigin) {
    const Vec2 w = eval_flow(FlowSpec::of(FlowKind::Attractor), 0.4, {0.0, 0.0});
    EXPECT_EQ(w.x, 0.0);
    EXPECT_EQ(w.y, 0.0);
}

TEST(FlowField, CatalogFormulas) {
    const Vec2 p{1.5, -2.0};
    auto at = [&](FlowKind k) { return eval_flow(FlowSpec::of(k), 0.0, p); };
    EXPECT_EQ(at(FlowKind::Attractor).x, -1.5 + 2.0 * -2.0);
    EXPECT_EQ(at(FlowKind::Attractor).y, -1.5 + 2.0);
    EXPECT_EQ(at(FlowKind::Repeller).x, 1.5 - 2.0);
    EXPECT_EQ(at(FlowKind::Repeller).y, -1.5 - 2.0);
    EXPECT_EQ(at(FlowKind::Vertical).x, 0.0);
    EXPECT_EQ(at(FlowKind::Vertical).y, -10.0);
    EXPECT_EQ(at(FlowKind::Stagnation).x, 1.5 + 4.0);
    EXPECT_EQ(at(FlowKind::Stagnation).y, -1.5 + 2.0);
}

TEST(FlowField, GyreAtTimeZero) {
    for (double y : {-7.0, 0.0, 3.3}) {
        const Vec2 w = eval_flow(FlowSpec::gyre(), 0.0, {0.5, y});
        EXPECT_NEAR(w.x, -2.0 * pi, 1e-14);
        EXPECT_NEAR(w.y, 0.0, 1e-14);
    }
}

TEST(FlowField, ConstantJacobians) {
    const Mat2 c = eval_jacobian(FlowSpec::of(FlowKind::Circle), 0.7, {3.0, -4.0});
    EXPECT_EQ(c, (Mat2{0.0, -1.0, 1.0, 0.0}));
    const Mat2 v = eval_jacobian(FlowSpec::of(FlowKind::Vertical), 0.1, {-8.0, 2.0});
    EXPECT_EQ(v, (Mat2{0.0, 0.0, 0.0, 5.0}));
}

TEST(FlowField, GyreJacobianMatchesFiniteDifferences) {
    const FlowSpec g = FlowSpec::gyre();
    const Mat2 J = eval_jacobian(g, 0.3, {1.2, -0.7});
    const Mat2 F = fd_jacobian(g, 0.3, {1.2, -0.7}, 1e-5);
    EXPECT_LE(max_abs(J - F), 1e-6);
    EXPECT_EQ(J.a12, 0.0);
    EXPECT_EQ(J.a22, 0.0);
}

TEST(FlowField, GyreTimeDerivativeMatchesFiniteDifferences) {
    const FlowSpec g = FlowSpec::gyre();
    const Vec2 a = eval_time_derivative(g, 0.25, {0.5, 0.0});
    const Vec2 f = fd_time(g, 0.25, {0.5, 0.0}, 1e-6);
    EXPECT_LE(std::fabs(a.x - f.x), 1e-6);
    EXPECT_LE(std::fabs(a.y - f.y), 1e-6);
}

TEST(FlowField, SteadyFlowsHaveZeroTimeDerivative) {
    for (FlowKind k : kAllFlowKinds) {
        if (k == FlowKind::Gyre) continue;
        const Vec2 d = eval_time_derivative(FlowSpec::of(k), 0.3, {4.0, -1.0});
        EXPECT_EQ(d.x, 0.0) << to_string(k);
        EXPECT_EQ(d.y, 0.0) << to_string(k);
    }
}

TEST(FlowField, ZeroFlowIsZeroEverywhere) {
    const FlowSpec z = FlowSpec::of(FlowKind::Zero);
    Rng rng(3);
    for (int k = 0; k < 20; ++k) {
        const Vec2 x{rng.uniform(-20, 20), rng.uniform(-20, 20)};
        EXPECT_EQ(eval_flow(z, rng.uniform01(), x), (Vec2{0.0, 0.0}));
        EXPECT_EQ(eval_jacobian(z, rng.uniform01(), x), (Mat2{0.0, 0.0, 0.0, 0.0}));
    }
}

TEST(FlowFieldProperty, JacobianAgreesWithFiniteDifferencesOnCatalog) {
    Rng rng(11);
    for (FlowKind k : kCatalogFlows) {
        const FlowSpec f = FlowSpec::of(k);
        double worst = 0.0;
        for (int s = 0; s < 100; ++s) {
            const double t = rng.uniform01();
            const Vec2 x{rng.uniform(-20, 20), rng.uniform(-20, 20)};
            worst = std::max(worst, max_abs(eval_jacobian(f, t, x) - fd_jacobian(f, t, x, 1e-5)));
        }
        EXPECT_LE(worst, 1e-5) << to_string(k);
    }
}

TEST(FlowFieldProperty, GyreTimeDerivativeAgreesOnRandomPoints) {
    const FlowSpec g = FlowSpec::gyre();
    Rng rng(12);
    for (int s = 0; s < 100; ++s) {
        const double t = rng.uniform(0.01, 0.99);
        const Vec2 x{rng.uniform(-20, 20), rng.uniform(-20, 20)};
        const Vec2 a = eval_time_derivative(g, t, x);
        const Vec2 f = fd_time(g, t, x, 1e-6);
        EXPECT_LE(norm(a - f), 1e-6 * (1.0 + norm(a)));
    }
}

TEST(FlowFieldProperty, AlphaScalesExactly) {
    Rng rng(13);
    for (FlowKind k : kCatalogFlows) {
        const FlowSpec full = FlowSpec::of(k);
        const FlowSpec half = full.scaled(0.5);
        for (int s = 0; s < 50; ++s) {
            const double t = rng.uniform01();
            const Vec2 x{rng.uniform(-20, 20), rng.uniform(-20, 20)};
            EXPECT_EQ(eval_flow(half, t, x), 0.5 * eval_flow(full, t, x));
            EXPECT_EQ(eval_jacobian(half, t, x), 0.5 * eval_jacobian(full, t, x));
            EXPECT_EQ(eval_time_derivative(half, t, x), 0.5 * eval_time_derivative(full, t, x));
        }
    }
}

TEST(FlowFieldProperty, LinearJacobianIsA) {
    const Mat2 A{0.3, -1.7, 2.2, 0.9};
    const FlowSpec f = FlowSpec::linear(A);
    Rng rng(14);
    for (int s = 0; s < 20; ++s) {
        const Vec2 x{rng.uniform(-20, 20), rng.uniform(-20, 20)};
        EXPECT_EQ(eval_jacobian(f, rng.uniform01(), x), A);
        EXPECT_EQ(eval_flow(f, 0.0, x), A * x);
    }
}

TEST(FlowField, NonFiniteInputThrows) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    for (FlowKind k : kAllFlowKinds) {
        const FlowSpec f = FlowSpec::of(k);
        EXPECT_THROW(eval_flow(f, 0.0, {nan, 0.0}), DomainError);
        EXPECT_THROW(eval_flow(f, nan, {0.0, 0.0}), DomainError);
        EXPECT_THROW(eval_jacobian(f, 0.0, {0.0, inf}), DomainError);
        EXPECT_THROW(eval_time_derivative(f, inf, {0.0, 0.0}), DomainError);
    }
}

TEST(FlowField, NamesRoundTrip) {
    for (FlowKind k : kAllFlowKinds) EXPECT_EQ(flow_kind_from_string(to_string(k)), k);
    EXPECT_FALSE(flow_kind_from_string("double_gyre").has_value());
}

TEST(FlowField, ValidateRejectsAlphaOutsideUnitInterval) {
    EXPECT_THROW(FlowSpec::of(FlowKind::Circle).scaled(1.5).validate(), ConfigError);
    EXPECT_THROW(FlowSpec::of(FlowKind::Circle).scaled(-0.1).validate(), ConfigError);
    EXPECT_NO_THROW(FlowSpec::of(FlowKind::Circle).scaled(0.0).validate());
}

TEST(FlowField, LinearMatrixOfCatalog) {
    EXPECT_EQ(*linear_matrix(FlowSpec::of(FlowKind::Attractor)), (Mat2{-1.0, 2.0, -1.0, -1.0}));
    EXPECT_EQ(*linear_matrix(FlowSpec::of(FlowKind::Stagnation)), (Mat2{1.0, -2.0, -1.0, -1.0}));
    EXPECT_FALSE(linear_matrix(FlowSpec::gyre()).has_value());
}
