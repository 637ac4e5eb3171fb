#pragma once

#include "whf/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

/// \file dopri5.hpp
/// Dormand-Prince 5(4) embedded Runge-Kutta pair with Hairer's step-size
/// controller and the 4th-order continuous extension (dense output).

namespace whf {

struct IntegratorOptions {
    double abs_tol{1e-9};
    double rel_tol{1e-9};
    /// Steps shorter than this abort the integration.
    double min_step{1e-14};
    std::size_t max_steps{500000};
};

namespace dopri5 {

inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

template <std::size_t N>
using State = std::array<double, N>;

template <std::size_t N>
bool all_finite(const State<N>& y) noexcept {
    return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

/// Dense-output polynomial of one accepted step.
template <std::size_t N>
struct DenseStep {
    double t0{0.0};
    double h{0.0};
    std::array<State<N>, 5> r{};

    State<N> operator()(double t) const noexcept {
        const double s = (t - t0) / h;
        const double s1 = 1.0 - s;
        State<N> y;
        for (std::size_t i = 0; i < N; ++i)
            y[i] = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
        return y;
    }
};

/// Hairer's starting step heuristic.
template <std::size_t N, class F>
double initial_step(F& f, double t0, const State<N>& y0, const State<N>& k1, double t_end,
                    const IntegratorOptions& opt) {
    double dnf = 0.0, dny = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double sk = opt.abs_tol + opt.rel_tol * std::fabs(y0[i]);
        dnf += (k1[i] / sk) * (k1[i] / sk);
        dny += (y0[i] / sk) * (y0[i] / sk);
    }
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
    const double span = t_end - t0;
    h = std::min(h, span);
    State<N> y1;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y0[i] + h * k1[i];
    const State<N> k2 = f(t0 + h, y1);
    double der2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double sk = opt.abs_tol + opt.rel_tol * std::fabs(y0[i]);
        der2 += ((k2[i] - k1[i]) / sk) * ((k2[i] - k1[i]) / sk);
    }
    der2 = std::sqrt(der2) / h;
    const double der12 = std::max(std::fabs(der2), std::sqrt(dnf));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::fabs(h) * 1e-3)
                                     : std::pow(0.01 / der12, 1.0 / 5.0);
    return std::min({100.0 * h, h1, span});
}

/// One accepted step of an adaptive run. Replaying a mesh repeats the same
/// arithmetic, so a replay from the recorded initial state is bitwise equal
/// to the run that recorded it.
struct MeshStep {
    double t;
    double h;
    bool last;
};
using Mesh = std::vector<MeshStep>;

namespace detail {

template <std::size_t N>
struct StepWork {
    State<N> k2, k3, k4, k5, k6, k7, ytmp, ynew;
};

/// Stages 2..7 of the step (t, y) -> (tph, ynew); k1 = f(t, y).
template <std::size_t N, class F>
void rk_step(F& f, double t, double h, double tph, const State<N>& y, const State<N>& k1, StepWork<N>& w) {
    for (std::size_t i = 0; i < N; ++i) w.ytmp[i] = y[i] + h * a21 * k1[i];
    w.k2 = f(t + c2 * h, w.ytmp);
    for (std::size_t i = 0; i < N; ++i) w.ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * w.k2[i]);
    w.k3 = f(t + c3 * h, w.ytmp);
    for (std::size_t i = 0; i < N; ++i) w.ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * w.k2[i] + a43 * w.k3[i]);
    w.k4 = f(t + c4 * h, w.ytmp);
    for (std::size_t i = 0; i < N; ++i)
        w.ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * w.k2[i] + a53 * w.k3[i] + a54 * w.k4[i]);
    w.k5 = f(t + c5 * h, w.ytmp);
    for (std::size_t i = 0; i < N; ++i)
        w.ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * w.k2[i] + a63 * w.k3[i] + a64 * w.k4[i] + a65 * w.k5[i]);
    w.k6 = f(tph, w.ytmp);
    for (std::size_t i = 0; i < N; ++i)
        w.ynew[i] = y[i] + h * (a71 * k1[i] + a73 * w.k3[i] + a74 * w.k4[i] + a75 * w.k5[i] + a76 * w.k6[i]);
    w.k7 = f(tph, w.ynew);
}

template <std::size_t N>
DenseStep<N> dense_step(double t, double h, const State<N>& y, const State<N>& k1, const StepWork<N>& w) {
    DenseStep<N> dense;
    dense.t0 = t;
    dense.h = h;
    for (std::size_t i = 0; i < N; ++i) {
        const double ydiff = w.ynew[i] - y[i];
        const double bspl = h * k1[i] - ydiff;
        dense.r[0][i] = y[i];
        dense.r[1][i] = ydiff;
        dense.r[2][i] = bspl;
        dense.r[3][i] = ydiff - h * w.k7[i] - bspl;
        dense.r[4][i] = h * (d1 * k1[i] + d3 * w.k3[i] + d4 * w.k4[i] + d5 * w.k5[i] + d6 * w.k6[i] + d7 * w.k7[i]);
    }
    return dense;
}

/// Reports the samples covered by an accepted step ending at tph.
template <std::size_t N, class Sink>
void emit_samples(std::span<const double> samples, std::size_t& next, bool last, double tph, double t_end,
                  const State<N>& ynew, const DenseStep<N>& dense, Sink& sink) {
    while (next < samples.size() && (last || samples[next] < tph)) {
        if (last && samples[next] >= t_end)
            sink(next, ynew);
        else
            sink(next, dense(samples[next]));
        ++next;
    }
}

} // namespace detail

/// Integrates y' = f(t, y) from t0 to t_end and reports the solution at each
/// requested sample time through `sink(index, y)`. Sample times must be
/// ascending and lie in [t0, t_end]; a sample exactly at t0 receives y0 and a
/// sample exactly at t_end receives the final step's endpoint rather than the
/// interpolant. Accepted steps are appended to `record` when given. Throws
/// IntegrationError on step underflow, step-count exhaustion or a non-finite
/// state.
template <std::size_t N, class F, class Sink>
State<N> integrate(F&& f, double t0, State<N> y, double t_end, std::span<const double> samples,
                   Sink&& sink, const IntegratorOptions& opt = {}, Mesh* record = nullptr) {
    constexpr double safe = 0.9, facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0, beta = 0.04;
    constexpr double expo1 = 0.2 - beta * 0.75;

    if (!all_finite<N>(y)) throw IntegrationError("non-finite initial state", t0);
    if (record) record->clear();

    std::size_t next = 0;
    while (next < samples.size() && samples[next] <= t0) sink(next++, y);
    if (t_end <= t0) return y;

    double t = t0;
    State<N> k1 = f(t, y);
    if (!all_finite<N>(k1)) throw IntegrationError("non-finite derivative", t);
    double h = initial_step<N>(f, t, y, k1, t_end, opt);
    double facold = 1e-4;
    bool reject = false;
    detail::StepWork<N> w;

    for (std::size_t step = 0;; ++step) {
        if (step >= opt.max_steps) throw IntegrationError("step limit exceeded", t);
        if (h < opt.min_step) throw IntegrationError("step size underflow", t);
        bool last = false;
        if ((t + 1.01 * h - t_end) >= 0.0) {
            h = t_end - t;
            last = true;
        }
        const double tph = last ? t_end : t + h;
        detail::rk_step<N>(f, t, h, tph, y, k1, w);

        double err = 0.0;
        bool finite = all_finite<N>(w.ynew) && all_finite<N>(w.k7);
        if (finite) {
            for (std::size_t i = 0; i < N; ++i) {
                const double ei = h * (e1 * k1[i] + e3 * w.k3[i] + e4 * w.k4[i] + e5 * w.k5[i] + e6 * w.k6[i] +
                                       e7 * w.k7[i]);
                const double sk = opt.abs_tol + opt.rel_tol * std::max(std::fabs(y[i]), std::fabs(w.ynew[i]));
                err += (ei / sk) * (ei / sk);
            }
            err = std::sqrt(err / static_cast<double>(N));
            finite = std::isfinite(err);
        }
        if (!finite) {
            // Shrink hard and retry; a genuinely divergent state ends in underflow.
            h *= 0.1;
            reject = true;
            continue;
        }

        const double fac11 = std::pow(err, expo1);
        double fac = fac11 / std::pow(facold, beta);
        fac = std::max(facc2, std::min(facc1, fac / safe));
        double hnew = h / fac;

        if (err <= 1.0) {
            facold = std::max(err, 1e-4);
            if (record) record->push_back({t, h, last});
            detail::emit_samples<N>(samples, next, last, tph, t_end, w.ynew, detail::dense_step<N>(t, h, y, k1, w),
                                    sink);
            k1 = w.k7;
            y = w.ynew;
            t = tph;
            if (last) return y;
            if (reject) hnew = std::min(hnew, h);
            reject = false;
            h = hnew;
        } else {
            hnew = h / std::min(facc1, fac11 / safe);
            reject = true;
            h = hnew;
        }
    }
}

/// Repeats the accepted steps of `mesh` (recorded by integrate over the same
/// [t0, t_end]) from a possibly different initial state, without error
/// control. For nearby initial states this is the same discrete map as the
/// recording run, which makes finite differences across it smooth. Throws
/// IntegrationError on a non-finite state.
template <std::size_t N, class F, class Sink>
State<N> replay(F&& f, double t0, State<N> y, double t_end, std::span<const double> samples, Sink&& sink,
                const Mesh& mesh) {
    if (!all_finite<N>(y)) throw IntegrationError("non-finite initial state", t0);
    std::size_t next = 0;
    while (next < samples.size() && samples[next] <= t0) sink(next++, y);
    if (t_end <= t0) return y;
    if (mesh.empty() || mesh.front().t != t0 || !mesh.back().last ||
        std::fabs(mesh.back().t + mesh.back().h - t_end) > 1e-12 * std::max(1.0, std::fabs(t_end)))
        throw IntegrationError("step mesh does not cover the interval", t0);

    State<N> k1 = f(t0, y);
    if (!all_finite<N>(k1)) throw IntegrationError("non-finite derivative", t0);
    detail::StepWork<N> w;
    for (const MeshStep& s : mesh) {
        const double tph = s.last ? t_end : s.t + s.h;
        detail::rk_step<N>(f, s.t, s.h, tph, y, k1, w);
        if (!all_finite<N>(w.ynew) || !all_finite<N>(w.k7)) throw IntegrationError("non-finite state", s.t);
        detail::emit_samples<N>(samples, next, s.last, tph, t_end, w.ynew, detail::dense_step<N>(s.t, s.h, y, k1, w),
                                sink);
        k1 = w.k7;
        y = w.ynew;
    }
    return y;
}

} // namespace dopri5
} // namespace whf
