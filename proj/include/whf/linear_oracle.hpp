#pragma once

#include "whf/errors.hpp"
#include "whf/linalg.hpp"

#include <cmath>
#include <stdexcept>

/// \file linear_oracle.hpp
/// Closed-form shooting solution for linear background flows w = A x.
///
/// With q(t) = exp(-A^T t) q(0) the terminal position satisfies
///     exp(-A) X(1) - xi = C q(0),   C = int_0^1 exp(-(A + A^T) s) ds,
/// so q(0) = C^{-1} (exp(-A) x1 - xi) and the minimal action is
/// E_min = (1/2) v^T C^{-1} v with v = exp(-A) x1 - xi.

namespace whf {

namespace detail {

/// sinh(d) / d, accurate near zero.
inline double sinhc(double d) noexcept {
    if (std::fabs(d) < 1e-4) {
        const double d2 = d * d;
        return 1.0 + d2 / 6.0 * (1.0 + d2 / 20.0);
    }
    return std::sinh(d) / d;
}

/// sin(d) / d, accurate near zero.
inline double sinc(double d) noexcept {
    if (std::fabs(d) < 1e-4) {
        const double d2 = d * d;
        return 1.0 - d2 / 6.0 * (1.0 - d2 / 20.0);
    }
    return std::sin(d) / d;
}

} // namespace detail

/// exp(M t) for a 2x2 matrix, in closed form.
///
/// Writing M t = s I + N with s = tr(M t) / 2 and N traceless gives
/// N^2 = delta^2 I where delta^2 = ((n11 - n22) / 2)^2 + n12 n21, hence
///     exp(M t) = e^s (cosh(delta) I + sinh(delta)/delta N)
/// (cos/sin for delta^2 < 0). For well separated real eigenvalues the two
/// exponentials are kept apart (Sylvester form) so entries that are small
/// differences of large terms are not formed by cancellation.
inline Mat2 matrix_exp(const Mat2& M, double t = 1.0) {
    const Mat2 Mt = t * M;
    if (!is_finite(Mt)) throw DomainError("matrix_exp of a non-finite matrix");
    const double s = 0.5 * Mt.trace();
    const double h = 0.5 * (Mt.a11 - Mt.a22);
    const Mat2 N{h, Mt.a12, Mt.a21, -h};
    const double disc = h * h + Mt.a12 * Mt.a21;
    const double es = std::exp(s);

    if (disc > 0.0) {
        const double d = std::sqrt(disc);
        if (d > 0.5) {
            // exp(M t) = (e^{s+d} (d I + N) + e^{s-d} (d I - N)) / (2 d)
            const double ep = std::exp(s + d) / (2.0 * d);
            const double em = std::exp(s - d) / (2.0 * d);
            return {ep * (d + h) + em * (d - h), (ep - em) * Mt.a12,
                    (ep - em) * Mt.a21, ep * (d - h) + em * (d + h)};
        }
        const double ch = std::cosh(d);
        const double sc = detail::sinhc(d);
        return es * (ch * Mat2::identity() + sc * N);
    }
    const double w = std::sqrt(-disc);
    return es * (std::cos(w) * Mat2::identity() + detail::sinc(w) * N);
}

/// Eigen-decomposition of a symmetric 2x2 matrix: S = R(theta) diag(l1, l2) R(theta)^T.
struct SymmetricEigen {
    double lambda1;
    double lambda2;
    double cos_theta;
    double sin_theta;
};

inline SymmetricEigen symmetric_eigen(double s11, double s12, double s22) noexcept {
    const double theta = 0.5 * std::atan2(2.0 * s12, s11 - s22);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double l1 = s11 * c * c + 2.0 * s12 * s * c + s22 * s * s;
    const double l2 = s11 * s * s - 2.0 * s12 * s * c + s22 * c * c;
    return {l1, l2, c, s};
}

/// (1 - e^{-lambda}) / lambda, equal to 1 at lambda = 0.
inline double gramian_weight(double lambda) noexcept {
    if (std::fabs(lambda) < 1e-6) return 1.0 - lambda / 2.0 + lambda * lambda / 6.0;
    return -std::expm1(-lambda) / lambda;
}

/// int_0^1 exp(-(A + A^T) s) ds through the eigen-decomposition of A + A^T.
/// Equals gramian_C(A) only when A is normal (A A^T = A^T A).
inline Mat2 gramian_symmetric_part(const Mat2& A) {
    if (!is_finite(A)) throw DomainError("gramian of a non-finite matrix");
    const Mat2 S = A + A.transposed();
    const auto e = symmetric_eigen(S.a11, 0.5 * (S.a12 + S.a21), S.a22);
    const double g1 = gramian_weight(e.lambda1);
    const double g2 = gramian_weight(e.lambda2);
    const double c = e.cos_theta, s = e.sin_theta;
    const double c12 = (g1 - g2) * c * s;
    return {g1 * c * c + g2 * s * s, c12, c12, g1 * s * s + g2 * c * c};
}

namespace detail {

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on P_n).
template <int N>
struct GaussLegendre {
    double x[N];
    double w[N];
    GaussLegendre() {
        const double pi = std::acos(-1.0);
        for (int i = 0; i < N; ++i) {
            double z = std::cos(pi * (i + 0.75) / (N + 0.5));
            double dp = 1.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = z;
                for (int k = 2; k <= N; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N * (z * p1 - p0) / (z * z - 1.0);
                const double dz = p1 / dp;
                z -= dz;
                if (std::fabs(dz) < 1e-16) break;
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }
};

} // namespace detail

/// Controllability Gramian C = int_0^1 exp(-A s) exp(-A^T s) ds. Normal
/// matrices use the closed form above; otherwise composite Gauss-Legendre
/// quadrature (the integrand is entire, so 8 x 16 nodes reach rounding level
/// for moderate |A|).
inline Mat2 gramian_C(const Mat2& A) {
    if (!is_finite(A)) throw DomainError("gramian of a non-finite matrix");
    if (max_abs(A * A.transposed() - A.transposed() * A) == 0.0) return gramian_symmetric_part(A);
    static const detail::GaussLegendre<16> gl;
    constexpr int panels = 8;
    Mat2 C{0.0, 0.0, 0.0, 0.0};
    for (int p = 0; p < panels; ++p) {
        const double a = static_cast<double>(p) / panels;
        const double half = 0.5 / panels;
        for (int i = 0; i < 16; ++i) {
            const double s = a + half * (gl.x[i] + 1.0);
            const Mat2 E = matrix_exp(A, -s);
            C = C + (half * gl.w[i]) * (E * E.transposed());
        }
    }
    const double off = 0.5 * (C.a12 + C.a21);
    return {C.a11, off, off, C.a22};
}

/// Closed-form shooting solution for one agent in w = A x.
struct LinearFlowSolution {
    Mat2 A;
    Mat2 expA_neg;
    Mat2 C;
    Vec2 q0;
    double E_min;
};

inline LinearFlowSolution solve_linear(const Mat2& A, Vec2 xi, Vec2 x1) {
    if (!is_finite(xi) || !is_finite(x1)) throw DomainError("non-finite endpoint");
    LinearFlowSolution sol;
    sol.A = A;
    sol.expA_neg = matrix_exp(A, -1.0);
    sol.C = gramian_C(A);
    if (!(sol.C.det() > 0.0)) throw std::logic_error("gramian is not positive definite");
    const Vec2 v = sol.expA_neg * x1 - xi;
    sol.q0 = solve(sol.C, v);
    sol.E_min = 0.5 * dot(v, sol.q0);
    return sol;
}

inline Vec2 analytic_initial_velocity(const Mat2& A, Vec2 xi, Vec2 x1) {
    return solve_linear(A, xi, x1).q0;
}

/// Minimal action (1/2) int |q|^2 dt of the transfer xi -> x1. This is the
/// ground cost c_A(xi, x1); the reported control energy carries no 1/2 and
/// equals twice this value.
inline double min_energy_cost(const Mat2& A, Vec2 xi, Vec2 x1) {
    return solve_linear(A, xi, x1).E_min;
}

} // namespace whf
