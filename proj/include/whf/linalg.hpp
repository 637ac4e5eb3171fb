#pragma once

#include <cmath>
#include <ostream>

/// \file linalg.hpp
/// Fixed-size planar vectors and 2x2 matrices. Everything in this library is
/// two-dimensional, so these small value types replace a general linear
/// algebra dependency.

namespace whf {

struct Vec2 {
    double x{0.0};
    double y{0.0};

    constexpr Vec2& operator+=(Vec2 o) noexcept { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) noexcept { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) noexcept { x *= s; y *= s; return *this; }

    friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
constexpr Vec2 operator-(Vec2 a) noexcept { return {-a.x, -a.y}; }
constexpr Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
constexpr Vec2 operator*(Vec2 a, double s) noexcept { return {s * a.x, s * a.y}; }

constexpr double dot(Vec2 a, Vec2 b) noexcept { return a.x * b.x + a.y * b.y; }
constexpr double norm_squared(Vec2 a) noexcept { return dot(a, a); }
inline double norm(Vec2 a) noexcept { return std::hypot(a.x, a.y); }
inline bool is_finite(Vec2 a) noexcept { return std::isfinite(a.x) && std::isfinite(a.y); }

inline std::ostream& operator<<(std::ostream& os, Vec2 v) {
    return os << '(' << v.x << ", " << v.y << ')';
}

/// Row-major 2x2 matrix [[a11, a12], [a21, a22]].
struct Mat2 {
    double a11{0.0};
    double a12{0.0};
    double a21{0.0};
    double a22{0.0};

    static constexpr Mat2 identity() noexcept { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 diag(double a, double b) noexcept { return {a, 0.0, 0.0, b}; }

    constexpr Mat2 transposed() const noexcept { return {a11, a21, a12, a22}; }
    constexpr double trace() const noexcept { return a11 + a22; }
    constexpr double det() const noexcept { return a11 * a22 - a12 * a21; }

    friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

constexpr Mat2 operator+(const Mat2& a, const Mat2& b) noexcept {
    return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
}
constexpr Mat2 operator-(const Mat2& a, const Mat2& b) noexcept {
    return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
}
constexpr Mat2 operator*(double s, const Mat2& a) noexcept {
    return {s * a.a11, s * a.a12, s * a.a21, s * a.a22};
}
constexpr Mat2 operator*(const Mat2& a, const Mat2& b) noexcept {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}
constexpr Vec2 operator*(const Mat2& a, Vec2 v) noexcept {
    return {a.a11 * v.x + a.a12 * v.y, a.a21 * v.x + a.a22 * v.y};
}

/// Largest absolute entry.
inline double max_abs(const Mat2& a) noexcept {
    return std::fmax(std::fmax(std::fabs(a.a11), std::fabs(a.a12)),
                     std::fmax(std::fabs(a.a21), std::fabs(a.a22)));
}

/// Inverse by the adjugate; the caller guarantees det != 0.
constexpr Mat2 inverse(const Mat2& a) noexcept {
    const double d = a.det();
    return {a.a22 / d, -a.a12 / d, -a.a21 / d, a.a11 / d};
}

/// Solves a x = b with the adjugate formula.
constexpr Vec2 solve(const Mat2& a, Vec2 b) noexcept {
    const double d = a.det();
    return {(a.a22 * b.x - a.a12 * b.y) / d, (a.a11 * b.y - a.a21 * b.x) / d};
}

inline bool is_finite(const Mat2& a) noexcept {
    return std::isfinite(a.a11) && std::isfinite(a.a12) && std::isfinite(a.a21) &&
           std::isfinite(a.a22);
}

inline std::ostream& operator<<(std::ostream& os, const Mat2& a) {
    return os << "[[" << a.a11 << ", " << a.a12 << "], [" << a.a21 << ", " << a.a22 << "]]";
}

} // namespace whf
