#pragma once

#include "whf/errors.hpp"
#include "whf/linalg.hpp"
#include "whf/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

/// \file density.hpp
/// Grid densities: analytic targets, Gaussian kernel density estimates of
/// agent positions, and the KL divergence between them. Every integral is a
/// midpoint rule over cell centers.

namespace whf {

/// Lower bound of every density value. Without it the KL divergence is
/// undefined wherever a target tail underflows.
inline constexpr double kDensityFloor = 1e-12;

struct GridSpec {
    double xmin{-20.0};
    double xmax{20.0};
    double ymin{-20.0};
    double ymax{20.0};
    /// Cells per axis.
    std::size_t n{500};

    double dx() const noexcept { return (xmax - xmin) / static_cast<double>(n); }
    double dy() const noexcept { return (ymax - ymin) / static_cast<double>(n); }
    double cell_area() const noexcept { return dx() * dy(); }
    double x_center(std::size_t i) const noexcept { return xmin + (static_cast<double>(i) + 0.5) * dx(); }
    double y_center(std::size_t j) const noexcept { return ymin + (static_cast<double>(j) + 0.5) * dy(); }
    std::size_t cells() const noexcept { return n * n; }

    void validate() const {
        if (!(xmax > xmin) || !std::isfinite(xmin) || !std::isfinite(xmax))
            throw ConfigError("grid requires xmax > xmin", "grid.bounds");
        if (!(ymax > ymin) || !std::isfinite(ymin) || !std::isfinite(ymax))
            throw ConfigError("grid requires ymax > ymin", "grid.bounds");
        if (n < 16) throw ConfigError("grid resolution must be at least 16", "grid.resolution");
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Unit-mass density sampled at cell centers, row-major with y as the slow
/// index: values[j * n + i] belongs to (x_center(i), y_center(j)).
struct DensityGrid {
    GridSpec grid;
    std::vector<double> values;
    double cell_area{0.0};

    double at(std::size_t i, std::size_t j) const { return values[j * grid.n + i]; }
    double mass() const noexcept {
        double m = 0.0;
        for (double v : values) m += v;
        return m * cell_area;
    }
    double min_value() const { return *std::min_element(values.begin(), values.end()); }
    /// (i, j) of the largest value; the first one in storage order on ties.
    std::pair<std::size_t, std::size_t> argmax() const {
        const auto k = static_cast<std::size_t>(
            std::distance(values.begin(), std::max_element(values.begin(), values.end())));
        return {k % grid.n, k / grid.n};
    }
};

struct PointGaussianTarget {
    Vec2 center{10.0, -10.0};
    double s{10.0};
};
struct RingTarget {
    Vec2 center{0.0, 0.0};
    double r0{8.0};
    double s{1.0};
};
struct HeartTarget {
    Vec2 center{0.0, 0.0};
    double s{3.0};
    double l{0.15};
};
using TargetSpec = std::variant<PointGaussianTarget, RingTarget, HeartTarget>;

struct PointInitial {
    Vec2 x0{-10.0, 10.0};
};
struct CircleFormationInitial {
    double radius{1.0};
};
struct GaussianCloudInitial {
    Vec2 center{0.0, 0.0};
    double s{1.0};
};
using InitialSpec = std::variant<PointInitial, CircleFormationInitial, GaussianCloudInitial>;

inline void validate(const TargetSpec& spec) {
    std::visit(
        [](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if (!is_finite(t.center)) throw ConfigError("target center must be finite", "target.center");
            if (!(t.s > 0.0) || !std::isfinite(t.s)) throw ConfigError("target s must be > 0", "target.s");
            if constexpr (std::is_same_v<T, RingTarget>)
                if (!(t.r0 > 0.0)) throw ConfigError("target r0 must be > 0", "target.r0");
            if constexpr (std::is_same_v<T, HeartTarget>)
                if (!(t.l > 0.0)) throw ConfigError("target l must be > 0", "target.l");
        },
        spec);
}

inline void validate(const InitialSpec& spec) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PointInitial>) {
                if (!is_finite(s.x0)) throw ConfigError("initial x0 must be finite", "initial.x0");
            } else if constexpr (std::is_same_v<T, CircleFormationInitial>) {
                if (!(s.radius > 0.0)) throw ConfigError("initial radius must be > 0", "initial.radius");
            } else {
                if (!is_finite(s.center)) throw ConfigError("initial center must be finite", "initial.center");
                if (!(s.s > 0.0)) throw ConfigError("initial s must be > 0", "initial.s");
            }
        },
        spec);
}

/// Heart potential X_l^2 + (5/4 Y_l - sqrt|X_l|)^2 with X_l = l (x - c_x), Y_l = l (y - c_y).
inline double heart_potential(const HeartTarget& h, Vec2 p) noexcept {
    const double X = h.l * (p.x - h.center.x);
    const double Y = h.l * (p.y - h.center.y);
    const double r = 1.25 * Y - std::sqrt(std::fabs(X));
    return X * X + r * r;
}

/// Unnormalized target formula at a point.
inline double target_formula(const TargetSpec& spec, Vec2 p) noexcept {
    return std::visit(
        [p](const auto& t) -> double {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, PointGaussianTarget>) {
                return std::exp(-norm_squared(p - t.center) / (2.0 * t.s * t.s)) /
                       (2.0 * std::numbers::pi * t.s * t.s);
            } else if constexpr (std::is_same_v<T, RingTarget>) {
                const double d = norm(p - t.center) - t.r0;
                return std::exp(-d * d / (2.0 * t.s * t.s));
            } else {
                return std::exp(-heart_potential(t, p) / (2.0 * t.s * t.s));
            }
        },
        spec);
}

/// Turns nonnegative cell weights into a unit-mass density whose values are
/// all at least kDensityFloor. Cells that would fall below the floor are
/// pinned to it and the remaining cells share the rest of the mass, so both
/// properties hold exactly (up to rounding). The scale is found by a short
/// fixed-point iteration over the floored set, which only grows.
inline DensityGrid floor_and_normalize(const GridSpec& grid, std::vector<double> raw) {
    const double area = grid.cell_area();
    const std::size_t cells = raw.size();
    double total = 0.0;
    for (double v : raw) total += v;
    total *= area;
    if (!std::isfinite(total)) throw DomainError("density weights are not finite");

    DensityGrid out{grid, std::move(raw), area};
    auto& v = out.values;
    if (!(total > 0.0)) {
        std::fill(v.begin(), v.end(), 1.0 / (area * static_cast<double>(cells)));
        return out;
    }

    double scale = 1.0 / total;
    for (int iter = 0; iter < 64; ++iter) {
        double kept = 0.0;
        std::size_t floored = 0;
        for (double u : v) {
            if (u * scale < kDensityFloor)
                ++floored;
            else
                kept += u;
        }
        const double free_mass = 1.0 - kDensityFloor * area * static_cast<double>(floored);
        if (!(kept > 0.0) || !(free_mass > 0.0)) {
            std::fill(v.begin(), v.end(), 1.0 / (area * static_cast<double>(cells)));
            return out;
        }
        const double next = free_mass / (kept * area);
        const bool stable = next == scale;
        scale = next;
        if (stable) break;
        // The floored set is monotone in the scale; stop once it no longer changes.
        std::size_t floored_next = 0;
        for (double u : v)
            if (u * scale < kDensityFloor) ++floored_next;
        if (floored_next == floored) break;
    }
    for (double& u : v) u = std::max(u * scale, kDensityFloor);
    return out;
}

/// Target formula evaluated at cell centers, floored and renormalized. Throws
/// ConfigError when every cell value is below the floor (for example a
/// point Gaussian narrower than the cell spacing placed between centers).
inline DensityGrid target_density(const TargetSpec& spec, const GridSpec& grid) {
    validate(spec);
    grid.validate();
    std::vector<double> raw(grid.cells());
    double peak = 0.0;
    for (std::size_t j = 0; j < grid.n; ++j) {
        const double y = grid.y_center(j);
        for (std::size_t i = 0; i < grid.n; ++i) {
            const double v = target_formula(spec, {grid.x_center(i), y});
            raw[j * grid.n + i] = v;
            peak = std::max(peak, v);
        }
    }
    if (!(peak >= kDensityFloor))
        throw ConfigError("target density lies entirely below the floor on this grid", "target");
    return floor_and_normalize(grid, std::move(raw));
}

/// Kernel sum (1/N) sum_i K_sigma(x - X_i) at cell centers before flooring,
/// K_sigma(u) = exp(-|u|^2 / (2 sigma^2)) / (2 pi sigma^2). The kernel is
/// separable, so each agent costs two 1-D exponential sweeps plus an outer
/// product. Agents are accumulated in sorted order, which makes the result
/// independent of the order they are passed in.
inline std::vector<double> kde_raw(std::span<const Vec2> positions, double sigma, const GridSpec& grid) {
    if (positions.empty()) throw ConfigError("kde requires at least one agent", "n_agents");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be > 0", "sigma");
    std::vector<Vec2> sorted(positions.begin(), positions.end());
    std::sort(sorted.begin(), sorted.end(),
              [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });

    const std::size_t n = grid.n;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const double weight = 1.0 / (2.0 * std::numbers::pi * sigma * sigma * static_cast<double>(sorted.size()));
    std::vector<double> raw(grid.cells(), 0.0);
    std::vector<double> gx(n), gy(n);
    for (Vec2 p : sorted) {
        if (!is_finite(p)) throw DomainError("kde of a non-finite position");
        for (std::size_t i = 0; i < n; ++i) {
            const double d = grid.x_center(i) - p.x;
            gx[i] = std::exp(-d * d * inv2s2);
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double d = grid.y_center(j) - p.y;
            gy[j] = weight * std::exp(-d * d * inv2s2);
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double wy = gy[j];
            if (wy == 0.0) continue;
            double* row = raw.data() + j * n;
            for (std::size_t i = 0; i < n; ++i) row[i] += wy * gx[i];
        }
    }
    return raw;
}

inline DensityGrid kde(std::span<const Vec2> positions, double sigma, const GridSpec& grid) {
    grid.validate();
    return floor_and_normalize(grid, kde_raw(positions, sigma, grid));
}

/// sum_cells p log(p / q) * cell_area.
inline double kl_divergence(const DensityGrid& p, const DensityGrid& q) {
    if (!(p.grid == q.grid) || p.values.size() != q.values.size())
        throw ConfigError("kl_divergence requires densities on the same grid");
    double sum = 0.0;
    for (std::size_t k = 0; k < p.values.size(); ++k) {
        const double pk = p.values[k];
        sum += pk * std::log(pk / q.values[k]);
    }
    return sum * p.cell_area;
}

/// A target density with its logarithm cached, for repeated KL evaluation
/// against many candidate densities.
class PreparedTarget {
public:
    PreparedTarget() = default;
    explicit PreparedTarget(DensityGrid q) : q_(std::move(q)) {
        log_q_.resize(q_.values.size());
        for (std::size_t k = 0; k < log_q_.size(); ++k) log_q_[k] = std::log(q_.values[k]);
    }

    const DensityGrid& density() const noexcept { return q_; }

    /// Same value as kl_divergence(p, density()) up to rounding.
    double kl_from(const DensityGrid& p) const {
        if (!(p.grid == q_.grid)) throw ConfigError("kl_divergence requires densities on the same grid");
        static const double log_floor = std::log(kDensityFloor);
        double sum = 0.0;
        for (std::size_t k = 0; k < p.values.size(); ++k) {
            const double pk = p.values[k];
            const double lp = pk == kDensityFloor ? log_floor : std::log(pk);
            sum += pk * (lp - log_q_[k]);
        }
        return sum * p.cell_area;
    }

private:
    DensityGrid q_;
    std::vector<double> log_q_;
};

/// Initial agent positions. CircleFormation places agent i (0-based) at angle
/// 2 pi i / N; GaussianCloud draws from the seeded stream in Rng.
inline std::vector<Vec2> sample_initial(const InitialSpec& spec, std::size_t N, std::uint64_t seed) {
    if (N < 1) throw ConfigError("n_agents must be at least 1", "n_agents");
    validate(spec);
    std::vector<Vec2> out;
    out.reserve(N);
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PointInitial>) {
                out.assign(N, s.x0);
            } else if constexpr (std::is_same_v<T, CircleFormationInitial>) {
                for (std::size_t i = 0; i < N; ++i) {
                    const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(N);
                    out.push_back({s.radius * std::cos(th), s.radius * std::sin(th)});
                }
            } else {
                Rng rng(seed);
                for (std::size_t i = 0; i < N; ++i) {
                    const double gx = rng.normal();
                    const double gy = rng.normal();
                    out.push_back(s.center + s.s * Vec2{gx, gy});
                }
            }
        },
        spec);
    return out;
}

} // namespace whf
