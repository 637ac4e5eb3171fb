#pragma once

#include "whf/density.hpp"
#include "whf/dynamics.hpp"
#include "whf/errors.hpp"
#include "whf/flowfield.hpp"
#include "whf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

/// \file objective.hpp
/// Shooting objective J(q0) = KL(kde(X(T)), target) + boundary penalty,
/// its finite-difference gradient, and the control-energy metrics.

namespace whf {

/// Objective value reported for any evaluation whose integration failed.
inline constexpr double kFailedObjective = 1e10;

enum class GradientMode { Forward, Central };

/// Alternative terminal cost on the final agent positions. When unset the
/// objective uses the KDE + KL mismatch against the target grid.
using TerminalCost = std::function<double(std::span<const Vec2>)>;

struct ObjectiveContext {
    FlowSpec flow;
    std::shared_ptr<const PreparedTarget> target;
    std::vector<Vec2> initial_positions;
    GridSpec grid;
    double sigma{1.0};
    double lambda_b{10.0};
    double D{20.0};
    double T{1.0};
    double dt{0.001};
    GradientMode gradient_mode{GradientMode::Forward};
    /// Workers for gradient probes; 0 means one per hardware thread.
    std::size_t threads{1};
    IntegratorOptions integrator{};
    TerminalCost terminal_cost{};

    std::size_t n_agents() const noexcept { return initial_positions.size(); }
    std::size_t dimension() const noexcept { return 2 * initial_positions.size(); }

    void validate() const {
        flow.validate();
        grid.validate();
        if (initial_positions.empty()) throw ConfigError("n_agents must be at least 1", "n_agents");
        for (Vec2 p : initial_positions)
            if (!is_finite(p)) throw ConfigError("initial positions must be finite", "initial");
        if (!(lambda_b >= 0.0)) throw ConfigError("lambda_b must be >= 0", "lambda_b");
        if (!(D > 0.0)) throw ConfigError("D must be > 0", "D");
        if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0", "sigma");
        grid_intervals(T, dt);
        if (!terminal_cost && !target) throw ConfigError("objective needs a target density", "target");
        if (target && !(target->density().grid == grid))
            throw ConfigError("target density grid differs from the objective grid", "grid");
    }
};

/// Builds a context with the target evaluated on `grid`.
inline ObjectiveContext make_context(const FlowSpec& flow, const TargetSpec& target,
                                     std::vector<Vec2> initial_positions, const GridSpec& grid = {}) {
    ObjectiveContext ctx;
    ctx.flow = flow;
    ctx.grid = grid;
    ctx.target = std::make_shared<const PreparedTarget>(target_density(target, grid));
    ctx.initial_positions = std::move(initial_positions);
    return ctx;
}

struct ObjectiveReport {
    double value{kFailedObjective};
    /// Terminal mismatch (the KL divergence unless a custom terminal cost is set).
    double kl_term{0.0};
    double penalty_term{0.0};
    Trajectory trajectory;
    /// Accepted step meshes of the integration, for replay by gradient probes.
    SwarmMesh mesh;
    bool failed{true};
    std::string failure;
};

/// Flat q0 layout: agent i occupies entries 2i (x) and 2i+1 (y).
inline std::vector<Vec2> unflatten(std::span<const double> flat) {
    std::vector<Vec2> out(flat.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {flat[2 * i], flat[2 * i + 1]};
    return out;
}

inline std::vector<double> flatten(std::span<const Vec2> v) {
    std::vector<double> out(2 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[2 * i] = v[i].x;
        out[2 * i + 1] = v[i].y;
    }
    return out;
}

inline double violation(Vec2 X, double D) noexcept { return std::max(0.0, norm(X) - D); }

/// lambda_b sum_i phi(X_i(T))^2 + (lambda_b / T) int_0^T sum_i phi(X_i(t))^2 dt,
/// phi(X) = max(0, |X| - D); the running integral is a composite trapezoid.
inline double boundary_penalty(const Trajectory& traj, double D, double lambda_b) {
    const std::size_t K = traj.n_samples();
    if (K == 0) return 0.0;
    auto sum_sq = [&](std::size_t k) {
        double s = 0.0;
        for (const auto& a : traj.states[k].agents) {
            const double v = violation(a.X, D);
            s += v * v;
        }
        return s;
    };
    const double terminal = sum_sq(K - 1);
    double running = 0.0;
    if (K > 1) {
        double prev = sum_sq(0);
        for (std::size_t k = 1; k < K; ++k) {
            const double cur = k + 1 == K ? terminal : sum_sq(k);
            running += 0.5 * (prev + cur) * (traj.times[k] - traj.times[k - 1]);
            prev = cur;
        }
    }
    const double T = traj.times.back() - traj.times.front();
    return lambda_b * terminal + (T > 0.0 ? lambda_b / T * running : 0.0);
}

/// Integrates the swarm from (initial_positions, q0) and scores the terminal
/// state. With `on_mesh` the agents follow those recorded step meshes instead
/// of adaptive steps. Integration failures never escape: the report is
/// flagged and its value set to kFailedObjective.
inline ObjectiveReport evaluate(std::span<const double> q0, const ObjectiveContext& ctx,
                                const SwarmMesh* on_mesh = nullptr) {
    ObjectiveReport rep;
    if (q0.size() != ctx.dimension())
        throw ConfigError("q0 must hold one 2-vector per agent", "q0");
    try {
        const std::vector<Vec2> controls = unflatten(q0);
        const SwarmState start = make_swarm(ctx.initial_positions, controls);
        rep.trajectory = on_mesh ? integrate_on_mesh(ctx.flow, start, ctx.T, ctx.dt, *on_mesh)
                                 : integrate(ctx.flow, start, ctx.T, ctx.dt, ctx.integrator, &rep.mesh);
        const std::vector<Vec2> terminal = rep.trajectory.positions_at(rep.trajectory.n_samples() - 1);
        rep.kl_term = ctx.terminal_cost ? ctx.terminal_cost(terminal)
                                        : ctx.target->kl_from(kde(terminal, ctx.sigma, ctx.grid));
        rep.penalty_term = boundary_penalty(rep.trajectory, ctx.D, ctx.lambda_b);
        rep.value = rep.kl_term + rep.penalty_term;
        if (!std::isfinite(rep.value)) throw DomainError("objective is not finite");
        rep.failed = false;
    } catch (const IntegrationError& e) {
        rep = ObjectiveReport{};
        rep.failure = e.what();
    } catch (const DomainError& e) {
        rep = ObjectiveReport{};
        rep.failure = e.what();
    }
    return rep;
}

inline double evaluate_value(std::span<const double> q0, const ObjectiveContext& ctx) {
    return evaluate(q0, ctx).value;
}

struct GradientResult {
    std::vector<double> gradient;
    bool ok{false};
    std::size_t evaluations{0};
};

/// Finite-difference step for coordinate value v.
inline double fd_step(double v) noexcept { return 1e-6 * (1.0 + std::fabs(v)); }

/// Finite-difference gradient of J. Forward mode costs one extra evaluation
/// per coordinate (plus the base evaluation unless `base`, an evaluation at
/// q0, is supplied), central mode two. Every probe replays the base
/// evaluation's step meshes: adaptive step selection is discontinuous in q0
/// and would otherwise add integrator-tolerance noise divided by the step h.
/// A failed probe falls back to the opposite one-sided difference; when both
/// sides fail the result is flagged !ok. Probes run on ctx.threads workers and
/// land in their coordinate's slot.
inline GradientResult gradient_fd(std::span<const double> q0, const ObjectiveContext& ctx,
                                  const ObjectiveReport* base = nullptr) {
    const std::size_t n = q0.size();
    GradientResult res;
    res.gradient.assign(n, 0.0);
    ObjectiveReport own;
    if (!base || base->failed || base->mesh.size() != ctx.n_agents()) {
        own = evaluate(q0, ctx);
        ++res.evaluations;
        if (own.failed) return res;
        base = &own;
    }
    const double f0 = base->value;
    const SwarmMesh& mesh = base->mesh;
    const bool central = ctx.gradient_mode == GradientMode::Central;
    std::vector<char> ok(n, 1);
    std::vector<std::size_t> evals(n, 0);

    parallel_for(n, ctx.threads, [&](std::size_t j) {
        std::vector<double> x(q0.begin(), q0.end());
        const double h = fd_step(q0[j]);
        auto probe = [&](double sign, bool& failed) {
            x[j] = q0[j] + sign * h;
            const auto rep = evaluate(x, ctx, &mesh);
            ++evals[j];
            failed = rep.failed;
            return rep.value;
        };
        bool fail_plus = false, fail_minus = false;
        const double fp = probe(+1.0, fail_plus);
        if (central) {
            const double fm = probe(-1.0, fail_minus);
            if (!fail_plus && !fail_minus)
                res.gradient[j] = (fp - fm) / (2.0 * h);
            else if (!fail_plus)
                res.gradient[j] = (fp - f0) / h;
            else if (!fail_minus)
                res.gradient[j] = (f0 - fm) / h;
            else
                ok[j] = 0;
        } else if (!fail_plus) {
            res.gradient[j] = (fp - f0) / h;
        } else {
            const double fm = probe(-1.0, fail_minus);
            if (!fail_minus)
                res.gradient[j] = (f0 - fm) / h;
            else
                ok[j] = 0;
        }
    });

    res.ok = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
    for (std::size_t e : evals) res.evaluations += e;
    return res;
}

/// Per-sample summed effort sum_i |X_i'(t_k) - w(t_k, X_i(t_k))|^2 with X'
/// from central differences (second-order one-sided at the ends).
inline std::vector<double> control_effort(const Trajectory& traj, const FlowSpec& flow) {
    const std::size_t K = traj.n_samples();
    if (K < 3) throw ConfigError("control energy needs at least 3 samples");
    const std::size_t N = traj.n_agents();
    std::vector<double> effort(K, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        auto X = [&](std::size_t k) { return traj.states[k].agents[i].X; };
        for (std::size_t k = 0; k < K; ++k) {
            Vec2 v;
            if (k == 0) {
                const double h = traj.times[1] - traj.times[0];
                v = (1.0 / (2.0 * h)) * (-3.0 * X(0) + 4.0 * X(1) - X(2));
            } else if (k + 1 == K) {
                const double h = traj.times[K - 1] - traj.times[K - 2];
                v = (1.0 / (2.0 * h)) * (3.0 * X(K - 1) - 4.0 * X(K - 2) + X(K - 3));
            } else {
                v = (1.0 / (traj.times[k + 1] - traj.times[k - 1])) * (X(k + 1) - X(k - 1));
            }
            effort[k] += norm_squared(v - eval_flow(flow, traj.times[k], X(k)));
        }
    }
    return effort;
}

/// E = sum_i int_0^T |X_i' - w(t, X_i)|^2 dt by the trapezoid rule. No 1/2
/// factor: E is twice the action int |q|^2 / 2 dt.
inline double control_energy(const Trajectory& traj, const FlowSpec& flow) {
    const auto effort = control_effort(traj, flow);
    double E = 0.0;
    for (std::size_t k = 1; k < effort.size(); ++k)
        E += 0.5 * (effort[k] + effort[k - 1]) * (traj.times[k] - traj.times[k - 1]);
    return E;
}

/// 1 - E_whf / E_str.
inline double savings(double E_whf, double E_str) {
    if (!(E_str > 0.0)) throw DomainError("straight-line energy must be positive");
    return 1.0 - E_whf / E_str;
}

} // namespace whf
