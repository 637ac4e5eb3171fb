#pragma once

#include "whf/errors.hpp"
#include "whf/linalg.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

/// \file flowfield.hpp
/// Background flows w(t, x) with analytic spatial Jacobian and time
/// derivative. A FlowSpec is an immutable value; every evaluation is a pure
/// function of (spec, t, x).

namespace whf {

enum class FlowKind { Circle, Attractor, Repeller, Vertical, Stagnation, Gyre, Linear, Zero };

inline constexpr std::array<FlowKind, 8> kAllFlowKinds = {
    FlowKind::Circle, FlowKind::Attractor, FlowKind::Repeller, FlowKind::Vertical,
    FlowKind::Stagnation, FlowKind::Gyre, FlowKind::Linear, FlowKind::Zero};

/// The five steady flows plus the gyre, in table order.
inline constexpr std::array<FlowKind, 6> kCatalogFlows = {
    FlowKind::Circle, FlowKind::Attractor, FlowKind::Repeller,
    FlowKind::Vertical, FlowKind::Stagnation, FlowKind::Gyre};

inline constexpr std::array<FlowKind, 5> kSteadyCatalogFlows = {
    FlowKind::Circle, FlowKind::Attractor, FlowKind::Repeller,
    FlowKind::Vertical, FlowKind::Stagnation};

inline std::string_view to_string(FlowKind kind) noexcept {
    switch (kind) {
    case FlowKind::Circle: return "circle";
    case FlowKind::Attractor: return "attractor";
    case FlowKind::Repeller: return "repeller";
    case FlowKind::Vertical: return "vertical";
    case FlowKind::Stagnation: return "stagnation";
    case FlowKind::Gyre: return "gyre";
    case FlowKind::Linear: return "linear";
    case FlowKind::Zero: return "zero";
    }
    return "unknown";
}

inline std::optional<FlowKind> flow_kind_from_string(std::string_view name) noexcept {
    for (FlowKind k : kAllFlowKinds)
        if (to_string(k) == name) return k;
    return std::nullopt;
}

struct FlowSpec {
    FlowKind kind{FlowKind::Zero};
    /// Gyre amplitude and angular frequency.
    double epsilon{0.1};
    double omega{2.0 * std::numbers::pi};
    /// Matrix of the Linear flow w = A x.
    Mat2 A{};
    /// Homotopy multiplier; evaluations return alpha times the unscaled flow.
    double alpha{1.0};

    static FlowSpec of(FlowKind kind) {
        FlowSpec f;
        f.kind = kind;
        return f;
    }
    static FlowSpec linear(const Mat2& a) {
        FlowSpec f;
        f.kind = FlowKind::Linear;
        f.A = a;
        return f;
    }
    static FlowSpec gyre(double epsilon = 0.1, double omega = 2.0 * std::numbers::pi) {
        FlowSpec f;
        f.kind = FlowKind::Gyre;
        f.epsilon = epsilon;
        f.omega = omega;
        return f;
    }

    FlowSpec scaled(double a) const {
        FlowSpec f = *this;
        f.alpha = a;
        return f;
    }

    bool is_steady() const noexcept { return kind != FlowKind::Gyre; }

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ConfigError("flow alpha must lie in [0, 1]", "flow.alpha");
        if (!std::isfinite(epsilon)) throw ConfigError("flow epsilon must be finite", "flow.epsilon");
        if (!std::isfinite(omega)) throw ConfigError("flow omega must be finite", "flow.omega");
        if (!is_finite(A)) throw ConfigError("flow matrix A must be finite", "flow.A");
    }
};

/// Matrix representation of the flows that are linear in x (every steady
/// catalog member, Linear and Zero). Empty for the gyre.
inline std::optional<Mat2> linear_matrix(const FlowSpec& flow) noexcept {
    switch (flow.kind) {
    case FlowKind::Circle: return Mat2{0.0, -1.0, 1.0, 0.0};
    case FlowKind::Attractor: return Mat2{-1.0, 2.0, -1.0, -1.0};
    case FlowKind::Repeller: return Mat2{1.0, 1.0, -1.0, 1.0};
    case FlowKind::Vertical: return Mat2{0.0, 0.0, 0.0, 5.0};
    case FlowKind::Stagnation: return Mat2{1.0, -2.0, -1.0, -1.0};
    case FlowKind::Linear: return flow.A;
    case FlowKind::Zero: return Mat2{};
    case FlowKind::Gyre: return std::nullopt;
    }
    return std::nullopt;
}

namespace detail {

inline void check_point(double t, Vec2 x) {
    if (!std::isfinite(t) || !is_finite(x)) throw DomainError("flow evaluated at a non-finite point");
}

// Gyre: f(t, x) = a(t) x^2 + b(t) x with a = eps sin(omega t), b = 1 - 2 eps sin(omega t),
// w = (-2 pi sin(pi f), 2 pi cos(pi f) df/dx). No y-dependence.
struct GyreTerms {
    double f, fx, a, at, bt, ft;
};

inline GyreTerms gyre_terms(const FlowSpec& s, double t, double x) noexcept {
    const double sn = std::sin(s.omega * t);
    const double cs = std::cos(s.omega * t);
    const double a = s.epsilon * sn;
    const double b = 1.0 - 2.0 * s.epsilon * sn;
    const double at = s.epsilon * s.omega * cs;
    const double bt = -2.0 * s.epsilon * s.omega * cs;
    return {a * x * x + b * x, 2.0 * a * x + b, a, at, bt, at * x * x + bt * x};
}

} // namespace detail

/// alpha * w(t, x).
inline Vec2 eval_flow(const FlowSpec& flow, double t, Vec2 x) {
    detail::check_point(t, x);
    Vec2 w;
    if (flow.kind == FlowKind::Gyre) {
        constexpr double pi = std::numbers::pi;
        const auto g = detail::gyre_terms(flow, t, x.x);
        w = {-2.0 * pi * std::sin(pi * g.f), 2.0 * pi * std::cos(pi * g.f) * g.fx};
    } else {
        w = *linear_matrix(flow) * x;
    }
    return flow.alpha * w;
}

/// alpha * Dw(t, x), entry (i, j) = d w_i / d x_j.
inline Mat2 eval_jacobian(const FlowSpec& flow, double t, Vec2 x) {
    detail::check_point(t, x);
    Mat2 J;
    if (flow.kind == FlowKind::Gyre) {
        constexpr double pi = std::numbers::pi;
        const auto g = detail::gyre_terms(flow, t, x.x);
        const double s = std::sin(pi * g.f);
        const double c = std::cos(pi * g.f);
        J.a11 = -2.0 * pi * pi * c * g.fx;
        J.a21 = 2.0 * pi * (-pi * s * g.fx * g.fx + 2.0 * g.a * c);
    } else {
        J = *linear_matrix(flow);
    }
    return flow.alpha * J;
}

/// alpha * dw/dt(t, x). Analytic for the gyre, zero for every steady flow.
inline Vec2 eval_time_derivative(const FlowSpec& flow, double t, Vec2 x) {
    detail::check_point(t, x);
    if (flow.kind != FlowKind::Gyre) return {0.0, 0.0};
    constexpr double pi = std::numbers::pi;
    const auto g = detail::gyre_terms(flow, t, x.x);
    const double s = std::sin(pi * g.f);
    const double c = std::cos(pi * g.f);
    const double fxt = 2.0 * g.at * x.x + g.bt;
    const Vec2 dwdt{-2.0 * pi * pi * c * g.ft,
                    2.0 * pi * (-pi * s * g.ft * g.fx + c * fxt)};
    return flow.alpha * dwdt;
}

} // namespace whf
