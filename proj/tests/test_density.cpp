#include "whf/density.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace whf;

namespace {

void expect_valid_density(const DensityGrid& d) {
    EXPECT_LE(std::fabs(d.mass() - 1.0), 1e-9);
    EXPECT_GE(d.min_value(), kDensityFloor);
    EXPECT_EQ(d.values.size(), d.grid.cells());
}

std::pair<std::size_t, std::size_t> cell_of(const GridSpec& g, Vec2 p) {
    return {static_cast<std::size_t>((p.x - g.xmin) / g.dx()), static_cast<std::size_t>((p.y - g.ymin) / g.dy())};
}

double value_at(const DensityGrid& d, Vec2 p) {
    const auto [i, j] = cell_of(d.grid, p);
    return d.at(i, j);
}

// KL(N(c1, s^2 I) || N(c2, s^2 I)) in two dimensions.
double gaussian_kl(Vec2 c1, Vec2 c2, double s) { return norm_squared(c1 - c2) / (2.0 * s * s); }

} // namespace

TEST(GridSpec, DefaultsAndGeometry) {
    const GridSpec g;
    EXPECT_EQ(g.n, 500u);
    EXPECT_DOUBLE_EQ(g.dx(), 0.08);
    EXPECT_DOUBLE_EQ(g.x_center(0), -19.96);
    EXPECT_DOUBLE_EQ(g.cell_area(), 0.0064);
}

TEST(GridSpec, ValidateRejectsBadGrids) {
    GridSpec g;
    g.n = 15;
    EXPECT_THROW(g.validate(), ConfigError);
    g = GridSpec{};
    g.xmax = g.xmin;
    EXPECT_THROW(g.validate(), ConfigError);
    g = GridSpec{};
    g.ymin = 30.0;
    EXPECT_THROW(g.validate(), ConfigError);
}

TEST(TargetDensity, PointGaussianPeaksInCellContainingCenter) {
    const GridSpec g;
    for (Vec2 c : {Vec2{10.0, -10.0}, Vec2{1.23, 4.56}, Vec2{-7.77, 0.01}}) {
        const DensityGrid d = target_density(PointGaussianTarget{c, 2.0}, g);
        expect_valid_density(d);
        const auto [i, j] = d.argmax();
        EXPECT_LE(g.xmin + i * g.dx(), c.x + 1e-12);
        EXPECT_GE(g.xmin + (i + 1) * g.dx(), c.x - 1e-12);
        EXPECT_LE(g.ymin + j * g.dy(), c.y + 1e-12);
        EXPECT_GE(g.ymin + (j + 1) * g.dy(), c.y - 1e-12);
    }
}

TEST(TargetDensity, RingModeOnMeanRadius) {
    const DensityGrid d = target_density(RingTarget{{0.0, 0.0}, 8.0, 1.0}, GridSpec{});
    expect_valid_density(d);
    for (double th : {0.1, 1.0, 2.5, 4.0}) {
        const Vec2 u{std::cos(th), std::sin(th)};
        const double v8 = value_at(d, 8.0 * u);
        EXPECT_GT(v8, value_at(d, 4.0 * u));
        EXPECT_GT(v8, value_at(d, 12.0 * u));
    }
}

TEST(TargetDensity, HeartPeaksAtCentroid) {
    // An odd resolution puts a cell center exactly on the centroid.
    GridSpec g;
    g.n = 501;
    const DensityGrid d = target_density(HeartTarget{{0.0, 0.0}, 3.0, 0.15}, g);
    expect_valid_density(d);
    const auto [i, j] = d.argmax();
    EXPECT_NEAR(g.x_center(i), 0.0, 1e-12);
    EXPECT_NEAR(g.y_center(j), 0.0, 1e-12);
    EXPECT_EQ(heart_potential(HeartTarget{}, {0.0, 0.0}), 0.0);
}

TEST(TargetDensity, DegenerateTargetIsRejected) {
    EXPECT_THROW(target_density(PointGaussianTarget{{0.0, 0.0}, 1e-3}, GridSpec{}), ConfigError);
}

TEST(TargetDensity, InvalidSpecsAreRejected) {
    EXPECT_THROW(target_density(PointGaussianTarget{{0.0, 0.0}, 0.0}, GridSpec{}), ConfigError);
    EXPECT_THROW(target_density(RingTarget{{0.0, 0.0}, -1.0, 1.0}, GridSpec{}), ConfigError);
    EXPECT_THROW(target_density(HeartTarget{{0.0, 0.0}, 3.0, 0.0}, GridSpec{}), ConfigError);
}

TEST(Kde, PeakValueBeforeNormalization) {
    GridSpec g;
    g.n = 501;
    const Vec2 origin[1] = {{0.0, 0.0}};
    const auto raw = kde_raw(origin, 1.0, g);
    EXPECT_NEAR(raw[250 * g.n + 250], 1.0 / (2.0 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(1.0 / (2.0 * std::numbers::pi), 0.159155, 1e-6);
}

TEST(Kde, MassBeforeAndAfterNormalization) {
    const GridSpec g;
    const Vec2 origin[1] = {{0.0, 0.0}};
    const auto raw = kde_raw(origin, 1.0, g);
    double m = 0.0;
    for (double v : raw) m += v;
    m *= g.cell_area();
    EXPECT_GE(m, 0.999);
    EXPECT_LE(m, 1.001);
    expect_valid_density(kde(origin, 1.0, g));
}

TEST(Kde, IdenticalAgentsMatchSingleAgent) {
    const GridSpec g;
    const std::vector<Vec2> one{{3.0, -2.0}};
    const std::vector<Vec2> many(7, Vec2{3.0, -2.0});
    const auto a = kde(one, 1.0, g), b = kde(many, 1.0, g);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k)
        worst = std::max(worst, std::fabs(a.values[k] - b.values[k]) / a.values[k]);
    EXPECT_LE(worst, 1e-13);
}

TEST(Kde, PermutationInvariantExactly) {
    const GridSpec g;
    std::vector<Vec2> pts;
    Rng rng(41);
    for (int i = 0; i < 12; ++i) pts.push_back({rng.uniform(-15, 15), rng.uniform(-15, 15)});
    const auto base = kde(pts, 1.0, g);
    std::mt19937 shuffle(7);
    for (int r = 0; r < 3; ++r) {
        std::shuffle(pts.begin(), pts.end(), shuffle);
        EXPECT_EQ(kde(pts, 1.0, g).values, base.values);
    }
}

TEST(Kde, AgentsFarOutsideGridGiveFlooredUniformDensity) {
    const std::vector<Vec2> far{{200.0, 200.0}};
    const auto d = kde(far, 1.0, GridSpec{});
    expect_valid_density(d);
}

TEST(Kde, RejectsBadInput) {
    const std::vector<Vec2> none;
    const std::vector<Vec2> one{{0.0, 0.0}};
    EXPECT_THROW(kde(none, 1.0, GridSpec{}), ConfigError);
    EXPECT_THROW(kde(one, 0.0, GridSpec{}), ConfigError);
    EXPECT_THROW(kde(std::vector<Vec2>{{std::nan(""), 0.0}}, 1.0, GridSpec{}), DomainError);
}

TEST(KlDivergence, SelfIsZero) {
    const auto nu = target_density(RingTarget{}, GridSpec{});
    EXPECT_EQ(kl_divergence(nu, nu), 0.0);
    EXPECT_EQ(PreparedTarget(nu).kl_from(nu), 0.0);
}

TEST(KlDivergence, OffsetGaussiansMatchClosedForm) {
    const double expected = gaussian_kl({0.0, 0.0}, {2.0, 0.0}, 3.0);
    EXPECT_NEAR(expected, 4.0 / 18.0, 1e-15);
    const auto p = target_density(PointGaussianTarget{{0.0, 0.0}, 3.0}, GridSpec{});
    const auto q = target_density(PointGaussianTarget{{2.0, 0.0}, 3.0}, GridSpec{});
    EXPECT_LE(std::fabs(kl_divergence(p, q) - expected), 0.02 * expected);
}

TEST(KlDivergence, RingAgainstWideGaussianIsNonNegative) {
    const auto p = target_density(RingTarget{{0.0, 0.0}, 8.0, 1.0}, GridSpec{});
    const auto q = target_density(PointGaussianTarget{{0.0, 0.0}, 10.0}, GridSpec{});
    EXPECT_GE(kl_divergence(p, q), 0.0);
}

TEST(KlDivergence, GridMismatchIsRejected) {
    GridSpec small;
    small.n = 100;
    const auto p = target_density(RingTarget{}, GridSpec{});
    const auto q = target_density(RingTarget{}, small);
    EXPECT_THROW(kl_divergence(p, q), ConfigError);
    EXPECT_THROW(PreparedTarget(q).kl_from(p), ConfigError);
}

TEST(KlDivergence, PreparedTargetAgrees) {
    const GridSpec g;
    const auto q = target_density(HeartTarget{}, g);
    const PreparedTarget prepared(q);
    Rng rng(42);
    for (int r = 0; r < 3; ++r) {
        std::vector<Vec2> pts;
        for (int i = 0; i < 5; ++i) pts.push_back({rng.uniform(-18, 18), rng.uniform(-18, 18)});
        const auto p = kde(pts, 1.0, g);
        const double a = kl_divergence(p, q), b = prepared.kl_from(p);
        EXPECT_LE(std::fabs(a - b), 1e-12 * std::max(1.0, std::fabs(a)));
    }
}

TEST(SampleInitial, CircleFormationQuarterAngles) {
    const auto p = sample_initial(CircleFormationInitial{}, 4, 0);
    const Vec2 expected[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (int i = 0; i < 4; ++i) EXPECT_LE(norm(p[i] - expected[i]), 1e-15);
}

TEST(SampleInitial, PointCopies) {
    const auto p = sample_initial(PointInitial{{-10.0, 10.0}}, 1, 0);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p[0], (Vec2{-10.0, 10.0}));
    EXPECT_EQ(sample_initial(PointInitial{}, 3, 9), std::vector<Vec2>(3, Vec2{-10.0, 10.0}));
}

TEST(SampleInitial, GaussianCloudIsSeeded) {
    const GaussianCloudInitial g{{1.0, -2.0}, 0.5};
    EXPECT_EQ(sample_initial(g, 50, 123), sample_initial(g, 50, 123));
    EXPECT_NE(sample_initial(g, 50, 123), sample_initial(g, 50, 124));
    const auto many = sample_initial(g, 20000, 5);
    Vec2 mean{0.0, 0.0};
    for (Vec2 p : many) mean += p;
    mean = (1.0 / many.size()) * mean;
    EXPECT_NEAR(mean.x, 1.0, 0.02);
    EXPECT_NEAR(mean.y, -2.0, 0.02);
}

TEST(SampleInitial, RejectsBadInput) {
    EXPECT_THROW(sample_initial(PointInitial{}, 0, 0), ConfigError);
    EXPECT_THROW(sample_initial(CircleFormationInitial{0.0}, 3, 0), ConfigError);
    EXPECT_THROW(sample_initial(GaussianCloudInitial{{0, 0}, -1.0}, 3, 0), ConfigError);
}

TEST(DensityProperty, EveryGridIsNormalizedAndFloored) {
    const GridSpec g;
    for (const TargetSpec& t : {TargetSpec{PointGaussianTarget{}}, TargetSpec{PointGaussianTarget{{0, 0}, 0.05}},
                                TargetSpec{RingTarget{}}, TargetSpec{HeartTarget{}}})
        expect_valid_density(target_density(t, g));
    Rng rng(43);
    for (int r = 0; r < 5; ++r) {
        std::vector<Vec2> pts;
        for (int i = 0; i < 8; ++i) pts.push_back({rng.uniform(-25, 25), rng.uniform(-25, 25)});
        expect_valid_density(kde(pts, rng.uniform(0.2, 3.0), g));
    }
}

TEST(DensityProperty, FloorNormalizationHoldsForExtremeWeights) {
    GridSpec g;
    g.n = 16;
    std::vector<double> raw(g.cells(), 0.0);
    raw[3] = 1e300;
    raw[4] = 1.0;
    const auto d = floor_and_normalize(g, raw);
    expect_valid_density(d);
    EXPECT_EQ(d.values[4], kDensityFloor);
    EXPECT_THROW(floor_and_normalize(g, std::vector<double>(g.cells(), std::numeric_limits<double>::infinity())),
                 DomainError);
}

TEST(DensityProperty, KlNonNegativeAndZeroOnlyForEqualGrids) {
    const GridSpec g;
    Rng rng(44);
    for (int r = 0; r < 5; ++r) {
        std::vector<Vec2> a, b;
        for (int i = 0; i < 4; ++i) {
            a.push_back({rng.uniform(-15, 15), rng.uniform(-15, 15)});
            b.push_back({rng.uniform(-15, 15), rng.uniform(-15, 15)});
        }
        const auto p = kde(a, 1.0, g), q = kde(b, 1.0, g);
        EXPECT_GE(kl_divergence(p, q), -1e-12);
        EXPECT_GT(kl_divergence(p, q), 1e-12);
        EXPECT_LE(std::fabs(kl_divergence(p, p)), 1e-12);
    }
}

TEST(DensityProperty, GridRefinementChangesKlByAtMostOnePercent) {
    const std::vector<Vec2> pts{{6.0, 5.0}, {-7.5, 2.0}, {0.5, -8.2}, {3.0, 3.0}, {-2.0, -6.0}};
    const RingTarget ring;
    GridSpec fine;
    fine.n = 1000;
    const double coarse_kl = kl_divergence(kde(pts, 1.0, GridSpec{}), target_density(ring, GridSpec{}));
    const double fine_kl = kl_divergence(kde(pts, 1.0, fine), target_density(ring, fine));
    EXPECT_LE(std::fabs(coarse_kl - fine_kl), 0.01 * fine_kl);
}
