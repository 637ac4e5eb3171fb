#pragma once

#include "whf/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

/// \file lbfgs.hpp
/// Limited-memory BFGS with the two-loop recursion and a strong Wolfe line
/// search (bracketing + zoom with safeguarded cubic interpolation).

namespace whf {

struct OptimizerOptions {
    /// Curvature pairs kept for the inverse-Hessian approximation.
    std::size_t memory{10};
    /// Stop when the gradient infinity norm falls to this value.
    double grad_tol{1e-6};
    /// Stop when the relative objective change stays at or below this value
    /// for three consecutive iterations.
    double f_rel_tol{1e-10};
    std::size_t max_iter{300};
    double wolfe_c1{1e-4};
    double wolfe_c2{0.9};
    /// Objective evaluations allowed per line search.
    std::size_t max_linesearch{40};

    void validate() const {
        if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
            throw ConfigError("optimizer requires 0 < wolfe_c1 < wolfe_c2 < 1", "optimizer.wolfe_c1");
        if (memory < 1) throw ConfigError("optimizer memory must be >= 1", "optimizer.memory");
        if (max_iter < 1) throw ConfigError("optimizer max_iter must be >= 1", "optimizer.max_iter");
        if (!(grad_tol >= 0.0)) throw ConfigError("optimizer grad_tol must be >= 0", "optimizer.grad_tol");
        if (!(f_rel_tol >= 0.0)) throw ConfigError("optimizer f_rel_tol must be >= 0", "optimizer.f_rel_tol");
        if (max_linesearch < 1) throw ConfigError("optimizer max_linesearch must be >= 1", "optimizer.max_linesearch");
    }
};

enum class StopReason { GradientTolerance, Stagnation, MaxIterations, LineSearchFailure, EvaluationFailure };

inline std::string_view to_string(StopReason r) noexcept {
    switch (r) {
    case StopReason::GradientTolerance: return "gradient_tolerance";
    case StopReason::Stagnation: return "stagnation";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::LineSearchFailure: return "line_search_failure";
    case StopReason::EvaluationFailure: return "evaluation_failure";
    }
    return "unknown";
}

struct OptimResult {
    std::vector<double> x;
    double f{std::numeric_limits<double>::quiet_NaN()};
    /// Objective at the start point followed by one entry per accepted step.
    std::vector<double> objective_history;
    double grad_norm_final{std::numeric_limits<double>::quiet_NaN()};
    std::size_t iterations{0};
    bool converged{false};
    StopReason reason{StopReason::MaxIterations};
    double wall_time{0.0};
    std::size_t function_evaluations{0};
    std::size_t gradient_evaluations{0};
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_inf(std::span<const double> a) noexcept {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::fabs(v));
    return m;
}

inline bool all_finite(std::span<const double> a) noexcept {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

/// Minimizer of the cubic through (a, fa, da), (b, fb, db); NaN when the
/// cubic has no interior minimum.
inline double cubic_min(double a, double fa, double da, double b, double fb, double db) noexcept {
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    return b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
}

/// Minimizer of the quadratic through (a, fa, da) and (b, fb).
inline double quadratic_min(double a, double fa, double da, double b, double fb) noexcept {
    const double h = b - a;
    const double denom = 2.0 * (fb - fa - da * h);
    if (!(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return a - da * h * h / denom;
}

struct Trial {
    double alpha{0.0};
    double f{0.0};
    double dphi{0.0};
    bool has_grad{false};
    std::vector<double> x;
    std::vector<double> g;
};

} // namespace detail

/// Minimizes f from x0. `f(span) -> double` returns the objective and
/// `g(span) -> vector<double>` its gradient; a non-finite value from either
/// marks the point as infeasible, and the line search backs away from it.
///
/// Terminates when |g|_inf <= grad_tol, when the relative change of f stays at
/// or below f_rel_tol for three consecutive iterations, at max_iter, or when
/// the line search cannot satisfy the strong Wolfe conditions within
/// max_linesearch evaluations (then the best Armijo point found is returned
/// with converged = false).
template <class F, class G>
OptimResult lbfgs_minimize(F&& f, G&& g, std::vector<double> x0, const OptimizerOptions& opts = {}) {
    opts.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t n = x0.size();
    OptimResult res;
    auto finish = [&](StopReason reason) {
        res.reason = reason;
        res.converged = reason == StopReason::GradientTolerance || reason == StopReason::Stagnation;
        res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return res;
    };
    auto eval_f = [&](std::span<const double> x) {
        ++res.function_evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    auto eval_g = [&](std::span<const double> x) {
        ++res.gradient_evaluations;
        return g(x);
    };

    res.x = std::move(x0);
    res.f = eval_f(res.x);
    res.objective_history.push_back(res.f);
    if (!std::isfinite(res.f)) return finish(StopReason::EvaluationFailure);
    std::vector<double> grad = eval_g(res.x);
    if (grad.size() != n || !detail::all_finite(grad)) return finish(StopReason::EvaluationFailure);
    res.grad_norm_final = detail::norm_inf(grad);

    std::deque<std::vector<double>> S, Y;
    std::deque<double> rho;
    std::size_t stagnant = 0;
    std::vector<double> d(n), alpha_buf;

    while (true) {
        if (res.grad_norm_final <= opts.grad_tol) return finish(StopReason::GradientTolerance);
        if (res.iterations >= opts.max_iter) return finish(StopReason::MaxIterations);

        // Two-loop recursion: d = -H g.
        std::vector<double> q = grad;
        const std::size_t m = S.size();
        alpha_buf.assign(m, 0.0);
        for (std::size_t k = m; k-- > 0;) {
            alpha_buf[k] = rho[k] * detail::dot(S[k], q);
            for (std::size_t i = 0; i < n; ++i) q[i] -= alpha_buf[k] * Y[k][i];
        }
        const double gamma = m > 0 ? 1.0 / (rho[m - 1] * detail::dot(Y[m - 1], Y[m - 1])) : 1.0;
        for (double& v : q) v *= gamma;
        for (std::size_t k = 0; k < m; ++k) {
            const double beta = rho[k] * detail::dot(Y[k], q);
            for (std::size_t i = 0; i < n; ++i) q[i] += S[k][i] * (alpha_buf[k] - beta);
        }
        for (std::size_t i = 0; i < n; ++i) d[i] = -q[i];
        double dphi0 = detail::dot(grad, d);
        if (!(dphi0 < 0.0)) {
            S.clear();
            Y.clear();
            rho.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -grad[i];
            dphi0 = detail::dot(grad, d);
        }
        double alpha_init = 1.0;
        if (S.empty()) alpha_init = std::min(1.0, 1.0 / std::sqrt(detail::dot(d, d)));

        // Strong Wolfe line search.
        const double f0 = res.f;
        const double c1 = opts.wolfe_c1, c2 = opts.wolfe_c2;
        std::size_t ls_evals = 0;
        auto probe = [&](double alpha) {
            detail::Trial t;
            t.alpha = alpha;
            t.x.resize(n);
            for (std::size_t i = 0; i < n; ++i) t.x[i] = res.x[i] + alpha * d[i];
            t.f = eval_f(t.x);
            ++ls_evals;
            return t;
        };
        auto with_grad = [&](detail::Trial& t) {
            t.g = eval_g(t.x);
            t.has_grad = t.g.size() == n && detail::all_finite(t.g);
            if (t.has_grad) t.dphi = detail::dot(t.g, d);
            return t.has_grad;
        };
        auto armijo = [&](const detail::Trial& t) { return std::isfinite(t.f) && t.f <= f0 + c1 * t.alpha * dphi0; };
        auto curvature = [&](const detail::Trial& t) { return std::fabs(t.dphi) <= -c2 * dphi0; };

        detail::Trial lo;  // alpha = 0 is the current iterate
        lo.alpha = 0.0;
        lo.f = f0;
        lo.dphi = dphi0;
        lo.has_grad = true;
        detail::Trial hi;
        std::optional<detail::Trial> accepted;
        bool bracketed = false;
        const double xscale = 1.0 + detail::norm_inf(res.x);
        const double dscale = detail::norm_inf(d);

        double alpha = alpha_init;
        for (std::size_t i = 0; ls_evals < opts.max_linesearch; ++i) {
            detail::Trial t = probe(alpha);
            if (!armijo(t) || (i > 0 && t.f >= lo.f)) {
                hi = std::move(t);
                bracketed = true;
                break;
            }
            if (!with_grad(t)) {
                hi = std::move(t);
                hi.f = std::numeric_limits<double>::infinity();
                bracketed = true;
                break;
            }
            if (curvature(t)) {
                accepted = std::move(t);
                break;
            }
            if (t.dphi >= 0.0) {
                hi = std::move(lo);
                lo = std::move(t);
                bracketed = true;
                break;
            }
            lo = std::move(t);
            alpha = std::min(4.0 * lo.alpha, 1e10);
        }

        while (!accepted && bracketed && ls_evals < opts.max_linesearch) {
            const double a = lo.alpha, b = hi.alpha;
            const double width = std::fabs(b - a);
            if (width * dscale <= 1e-15 * xscale) break;
            double trial = std::numeric_limits<double>::quiet_NaN();
            if (std::isfinite(hi.f)) {
                trial = hi.has_grad ? detail::cubic_min(a, lo.f, lo.dphi, b, hi.f, hi.dphi)
                                    : detail::quadratic_min(a, lo.f, lo.dphi, b, hi.f);
            }
            const double lo_edge = std::min(a, b) + 0.1 * width;
            const double hi_edge = std::max(a, b) - 0.1 * width;
            if (!std::isfinite(trial)) {
                // Infeasible far end: shrink aggressively towards lo.
                trial = std::isfinite(hi.f) ? 0.5 * (a + b) : a + 0.1 * (b - a);
            }
            trial = std::clamp(trial, lo_edge, hi_edge);

            detail::Trial t = probe(trial);
            if (!armijo(t) || t.f >= lo.f) {
                hi = std::move(t);
                continue;
            }
            if (!with_grad(t)) {
                hi = std::move(t);
                hi.f = std::numeric_limits<double>::infinity();
                continue;
            }
            if (curvature(t)) {
                accepted = std::move(t);
                break;
            }
            if (t.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = std::move(lo);
            lo = std::move(t);
        }

        bool ls_failed = false;
        if (!accepted) {
            ls_failed = true;
            if (lo.alpha > 0.0) accepted = std::move(lo);
        }
        if (!accepted) return finish(StopReason::LineSearchFailure);

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = accepted->x[i] - res.x[i];
            y[i] = accepted->g[i] - grad[i];
        }
        const double sy = detail::dot(s, y);
        const double f_old = res.f;
        res.x = std::move(accepted->x);
        res.f = accepted->f;
        grad = std::move(accepted->g);
        res.grad_norm_final = detail::norm_inf(grad);
        ++res.iterations;
        res.objective_history.push_back(res.f);

        if (sy > 1e-10 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
            if (S.size() == opts.memory) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
        }

        if (ls_failed) return finish(StopReason::LineSearchFailure);

        const double scale = std::max({std::fabs(f_old), std::fabs(res.f), std::numeric_limits<double>::min()});
        if (std::fabs(f_old - res.f) / scale <= opts.f_rel_tol) {
            if (++stagnant >= 3) return finish(StopReason::Stagnation);
        } else {
            stagnant = 0;
        }
    }
}

} // namespace whf
