#include "whf/linear_oracle.hpp"
#include "whf/objective.hpp"
#include "whf/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace whf;

namespace {

ObjectiveContext benchmark_context(FlowKind k) {
    return make_context(FlowSpec::of(k), PointGaussianTarget{{10.0, -10.0}, 10.0}, {{-10.0, 10.0}});
}

// Exact integral of (30 - 20t)^2 + (10 + 20t)^2 over [0, 1] by Simpson's rule,
// which is exact for quadratics.
double circle_straight_line_energy() {
    auto f = [](double t) { return (30 - 20 * t) * (30 - 20 * t) + (10 + 20 * t) * (10 + 20 * t); };
    return (f(0.0) + 4.0 * f(0.5) + f(1.0)) / 6.0;
}

double rel_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0, n = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        d += (a[j] - b[j]) * (a[j] - b[j]);
        n += b[j] * b[j];
    }
    return std::sqrt(d / n);
}

} // namespace

TEST(BoundaryPenalty, ZeroInsideDomain) {
    const auto tr = straight_line_trajectory(Vec2{-10.0, 10.0}, Vec2{10.0, -10.0}, 1.0, 0.01);
    EXPECT_EQ(boundary_penalty(tr, 20.0, 10.0), 0.0);
}

TEST(BoundaryPenalty, ConstantViolation) {
    const auto tr = straight_line_trajectory(Vec2{21.0, 0.0}, Vec2{21.0, 0.0}, 1.0, 0.01);
    EXPECT_NEAR(boundary_penalty(tr, 20.0, 1.0), 2.0, 1e-12);
}

TEST(BoundaryPenalty, LinearInWeight) {
    const auto tr = straight_line_trajectory(Vec2{0.0, 0.0}, Vec2{30.0, 5.0}, 1.0, 0.01);
    const double p = boundary_penalty(tr, 20.0, 3.0);
    EXPECT_GT(p, 0.0);
    EXPECT_EQ(boundary_penalty(tr, 20.0, 6.0), 2.0 * p);
}

TEST(Evaluate, ZeroFlowHitsMatchingGaussian) {
    auto ctx = make_context(FlowSpec::of(FlowKind::Zero), PointGaussianTarget{{1.0, 0.0}, 1.0}, {{0.0, 0.0}});
    const auto rep = evaluate(std::vector<double>{1.0, 0.0}, ctx);
    ASSERT_FALSE(rep.failed);
    EXPECT_LE(rep.kl_term, 1e-6);
    EXPECT_EQ(rep.penalty_term, 0.0);
    EXPECT_EQ(rep.value, rep.kl_term + rep.penalty_term);
}

TEST(Evaluate, RepellerExcursionIsPenalized) {
    auto ctx = make_context(FlowSpec::of(FlowKind::Repeller), PointGaussianTarget{}, {{10.0, 10.0}});
    const auto rep = evaluate(std::vector<double>{30.0, 30.0}, ctx);
    ASSERT_FALSE(rep.failed);
    EXPECT_GT(rep.penalty_term, 0.0);
}

TEST(Evaluate, PermutationInvariant) {
    const std::vector<Vec2> pos{{1.0, 2.0}, {-3.0, 0.5}, {4.0, -4.0}};
    const std::vector<double> q{0.5, -1.0, 2.0, 0.3, -0.7, 1.1};
    const std::vector<Vec2> pos_p{pos[2], pos[0], pos[1]};
    const std::vector<double> q_p{q[4], q[5], q[0], q[1], q[2], q[3]};
    auto a = make_context(FlowSpec::of(FlowKind::Stagnation), RingTarget{}, pos);
    auto b = make_context(FlowSpec::of(FlowKind::Stagnation), RingTarget{}, pos_p);
    const auto ra = evaluate(q, a), rb = evaluate(q_p, b);
    EXPECT_EQ(ra.kl_term, rb.kl_term);
    EXPECT_NEAR(ra.penalty_term, rb.penalty_term, 1e-12 * (1.0 + ra.penalty_term));
}

TEST(Evaluate, ZeroPenaltyWeightLeavesPureKl) {
    auto ctx = make_context(FlowSpec::of(FlowKind::Vertical), RingTarget{}, {{0.0, 5.0}});
    ctx.lambda_b = 0.0;
    const auto rep = evaluate(std::vector<double>{0.0, 1.0}, ctx);
    ASSERT_FALSE(rep.failed);
    EXPECT_EQ(rep.penalty_term, 0.0);
    EXPECT_EQ(rep.value, rep.kl_term);
}

TEST(Evaluate, IntegrationFailureGivesSentinel) {
    auto ctx = make_context(FlowSpec::linear({800.0, 0.0, 0.0, 800.0}), PointGaussianTarget{}, {{1.0, 1.0}});
    const auto rep = evaluate(std::vector<double>{0.0, 0.0}, ctx);
    EXPECT_TRUE(rep.failed);
    EXPECT_EQ(rep.value, kFailedObjective);
    EXPECT_FALSE(rep.failure.empty());
}

TEST(Evaluate, WrongDimensionIsRejected) {
    auto ctx = benchmark_context(FlowKind::Circle);
    EXPECT_THROW(evaluate(std::vector<double>{1.0}, ctx), ConfigError);
}

TEST(Evaluate, ContextValidation) {
    auto ctx = benchmark_context(FlowKind::Circle);
    ctx.lambda_b = -1.0;
    try {
        ctx.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "lambda_b");
        EXPECT_NE(std::string(e.what()).find("lambda_b must be >= 0"), std::string::npos);
    }
    ctx = benchmark_context(FlowKind::Circle);
    ctx.D = 0.0;
    EXPECT_THROW(ctx.validate(), ConfigError);
}

TEST(ObjectiveProperty, NeverNegative) {
    Rng rng(51);
    for (FlowKind k : kCatalogFlows) {
        auto ctx = make_context(FlowSpec::of(k), RingTarget{}, sample_initial(CircleFormationInitial{}, 3, 0));
        ctx.dt = 0.01;
        for (int s = 0; s < 3; ++s) {
            std::vector<double> q(6);
            for (double& v : q) v = rng.uniform(-5, 5);
            EXPECT_GE(evaluate_value(q, ctx), -1e-12) << to_string(k);
        }
    }
}

TEST(Gradient, QuadraticSurrogateMatchesAnalyticForm) {
    const Vec2 xi{-1.0, 2.0}, target{3.0, -0.5};
    ObjectiveContext ctx;
    ctx.flow = FlowSpec::of(FlowKind::Zero);
    ctx.initial_positions = {xi};
    ctx.dt = 0.01;
    ctx.terminal_cost = [target](std::span<const Vec2> X) { return 0.5 * norm_squared(X[0] - target); };
    for (GradientMode mode : {GradientMode::Forward, GradientMode::Central}) {
        ctx.gradient_mode = mode;
        const std::vector<double> q{0.7, -1.3};
        const auto g = gradient_fd(q, ctx);
        ASSERT_TRUE(g.ok);
        EXPECT_NEAR(g.gradient[0], q[0] + xi.x - target.x, 1e-5);
        EXPECT_NEAR(g.gradient[1], q[1] + xi.y - target.y, 1e-5);
    }
}

TEST(Gradient, EvaluationCounts) {
    auto ctx = make_context(FlowSpec::of(FlowKind::Circle), RingTarget{}, sample_initial(CircleFormationInitial{}, 3, 0));
    ctx.dt = 0.01;
    const std::vector<double> q(6, 0.1);
    EXPECT_EQ(gradient_fd(q, ctx).evaluations, 7u);
    const auto base = evaluate(q, ctx);
    EXPECT_EQ(gradient_fd(q, ctx, &base).evaluations, 6u);
    ctx.gradient_mode = GradientMode::Central;
    EXPECT_EQ(gradient_fd(q, ctx, &base).evaluations, 12u);
}

TEST(Evaluate, ReplayOnOwnMeshIsBitwiseEqual) {
    auto ctx = benchmark_context(FlowKind::Gyre);
    const std::vector<double> q{0.4, -0.9};
    const auto base = evaluate(q, ctx);
    ASSERT_FALSE(base.failed);
    ASSERT_EQ(base.mesh.size(), 1u);
    EXPECT_EQ(evaluate(q, ctx, &base.mesh).value, base.value);
}

TEST(Gradient, ParallelProbesGiveIdenticalGradient) {
    auto ctx = make_context(FlowSpec::of(FlowKind::Repeller), RingTarget{}, sample_initial(CircleFormationInitial{}, 4, 0));
    ctx.dt = 0.01;
    const std::vector<double> q{0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8};
    const auto serial = gradient_fd(q, ctx);
    ctx.threads = 4;
    EXPECT_EQ(gradient_fd(q, ctx).gradient, serial.gradient);
}

TEST(Gradient, FailedProbeFallsBackToOtherSide) {
    // The forward probe in x lands past a cliff where the terminal cost throws.
    ObjectiveContext ctx;
    ctx.flow = FlowSpec::of(FlowKind::Zero);
    ctx.initial_positions = {{0.0, 0.0}};
    ctx.dt = 0.1;
    ctx.terminal_cost = [](std::span<const Vec2> X) {
        if (X[0].x > 1.0) throw DomainError("cliff");
        return X[0].x * X[0].x + X[0].y;
    };
    const std::vector<double> q{1.0, 0.0};
    const auto g = gradient_fd(q, ctx);
    ASSERT_TRUE(g.ok);
    EXPECT_NEAR(g.gradient[0], 2.0, 1e-5);
    EXPECT_NEAR(g.gradient[1], 1.0, 1e-5);

    ctx.terminal_cost = [](std::span<const Vec2> X) {
        if (X[0].x != 1.0) throw DomainError("isolated point");
        return 0.0;
    };
    EXPECT_FALSE(gradient_fd(q, ctx).ok);
}

TEST(Gradient, ForwardAndCentralAgreeOnSteadyFlows) {
    Rng rng(52);
    for (FlowKind k : kSteadyCatalogFlows) {
        auto ctx = benchmark_context(k);
        for (int s = 0; s < 5; ++s) {
            const std::vector<double> q{rng.uniform(-1, 1), rng.uniform(-1, 1)};
            const auto base = evaluate(q, ctx);
            ctx.gradient_mode = GradientMode::Forward;
            const auto f = gradient_fd(q, ctx, &base);
            ctx.gradient_mode = GradientMode::Central;
            const auto c = gradient_fd(q, ctx, &base);
            ASSERT_TRUE(f.ok && c.ok);
            EXPECT_LE(rel_norm_diff(f.gradient, c.gradient), 1e-4) << to_string(k);
        }
    }
}

// Forward minus central is the truncation term (h/2) d2J/dq_j^2 of the
// forward difference, up to roundoff of order eps |J| / h. The second
// derivative comes from a 1e-4 stencil on the same step mesh.
TEST(Gradient, ForwardMinusCentralIsTruncationTerm) {
    Rng rng(53);
    for (FlowKind k : kCatalogFlows) {
        auto ctx = benchmark_context(k);
        for (int s = 0; s < 3; ++s) {
            const std::vector<double> q{rng.uniform(-1, 1), rng.uniform(-1, 1)};
            const auto base = evaluate(q, ctx);
            ctx.gradient_mode = GradientMode::Forward;
            const auto f = gradient_fd(q, ctx, &base);
            ctx.gradient_mode = GradientMode::Central;
            const auto c = gradient_fd(q, ctx, &base);
            for (std::size_t j = 0; j < 2; ++j) {
                const double H = 1e-4;
                std::vector<double> x = q;
                x[j] = q[j] + H;
                const double fp = evaluate(x, ctx, &base.mesh).value;
                x[j] = q[j] - H;
                const double fm = evaluate(x, ctx, &base.mesh).value;
                const double predicted = 0.5 * fd_step(q[j]) * (fp - 2.0 * base.value + fm) / (H * H);
                const double gap = f.gradient[j] - c.gradient[j];
                const double noise = 1e-6 * (1.0 + std::fabs(c.gradient[j])) +
                                     10.0 * std::numeric_limits<double>::epsilon() * std::fabs(base.value) / fd_step(q[j]);
                EXPECT_LE(std::fabs(gap - predicted), 0.05 * std::fabs(predicted) + noise)
                    << to_string(k) << " j=" << j;
            }
        }
    }
}

TEST(Gradient, SmallAtConvergedMinimizer) {
    const auto ctx = benchmark_context(FlowKind::Circle);
    const auto res = minimize_objective(ctx, {0.0, 0.0});
    ASSERT_TRUE(res.converged);
    const auto g = gradient_fd(res.x, ctx);
    EXPECT_LE(std::max(std::fabs(g.gradient[0]), std::fabs(g.gradient[1])), 1e-4);
}

TEST(ControlEnergy, ZeroFlowUnitStraightLine) {
    const auto tr = straight_line_trajectory(Vec2{0.0, 0.0}, Vec2{1.0, 0.0}, 1.0, 0.001);
    EXPECT_NEAR(control_energy(tr, FlowSpec::of(FlowKind::Zero)), 1.0, 1e-12);
}

TEST(ControlEnergy, CircleStraightLine) {
    const double exact = circle_straight_line_energy();
    EXPECT_NEAR(exact, 2600.0 / 3.0, 1e-10);
    const auto tr = straight_line_trajectory(Vec2{-10.0, 10.0}, Vec2{10.0, -10.0}, 1.0, 0.001);
    const double E = control_energy(tr, FlowSpec::of(FlowKind::Circle));
    EXPECT_LE(std::fabs(E - exact), 0.005 * exact);
}

TEST(ControlEnergy, ReversedAgentOrderGivesSameEnergy) {
    const std::vector<Vec2> a{{0.0, 0.0}, {3.0, 1.0}, {-2.0, 5.0}}, b{{4.0, 4.0}, {-1.0, 1.0}, {0.0, -6.0}};
    const std::vector<Vec2> ar(a.rbegin(), a.rend()), br(b.rbegin(), b.rend());
    const FlowSpec f = FlowSpec::of(FlowKind::Stagnation);
    const double e1 = control_energy(straight_line_trajectory(a, b, 1.0, 0.01, f), f);
    const double e2 = control_energy(straight_line_trajectory(ar, br, 1.0, 0.01, f), f);
    EXPECT_NEAR(e1, e2, 1e-12 * e1);
}

TEST(ControlEnergy, OptimalLinearTrajectoryMatchesTwiceMinimalAction) {
    for (FlowKind k : kSteadyCatalogFlows) {
        const Mat2 A = *linear_matrix(FlowSpec::of(k));
        const Vec2 xi{-10.0, 10.0}, x1{10.0, -10.0};
        const auto sol = solve_linear(A, xi, x1);
        const auto tr = integrate(FlowSpec::of(k), make_swarm(std::vector<Vec2>{xi}, std::vector<Vec2>{sol.q0}), 1.0, 0.001);
        EXPECT_LE(std::fabs(control_energy(tr, FlowSpec::of(k)) - 2.0 * sol.E_min), 0.01 * 2.0 * sol.E_min)
            << to_string(k);
    }
}

TEST(ControlEnergy, NeedsThreeSamples) {
    const auto tr = straight_line_trajectory(Vec2{0.0, 0.0}, Vec2{1.0, 0.0}, 1.0, 1.0);
    EXPECT_THROW(control_energy(tr, FlowSpec{}), ConfigError);
}

TEST(Savings, Examples) {
    EXPECT_EQ(savings(5.0, 5.0), 0.0);
    EXPECT_EQ(savings(0.0, 5.0), 1.0);
    EXPECT_NEAR(savings(3.0, 4.0), 0.25, 1e-15);
    EXPECT_THROW(savings(1.0, 0.0), DomainError);
    EXPECT_THROW(savings(1.0, -2.0), DomainError);
}

TEST(Flatten, RoundTrip) {
    const std::vector<Vec2> v{{1.0, 2.0}, {3.0, 4.0}};
    const auto f = flatten(v);
    EXPECT_EQ(f, (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
    EXPECT_EQ(unflatten(f), v);
}
