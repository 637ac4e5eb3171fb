#pragma once

#include "whf/dopri5.hpp"
#include "whf/errors.hpp"
#include "whf/flowfield.hpp"
#include "whf/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

/// \file dynamics.hpp
/// Per-agent Hamiltonian system
///     X' = q + w(t, X),   q' = -Dw(t, X)^T q
/// with control Hamiltonian H = |q|^2 / 2 + q . w(t, X). Agents never
/// interact, so a swarm is integrated agent by agent, each with its own
/// adaptive step sequence; the result does not depend on agent order.

namespace whf {

struct AgentState {
    Vec2 X;
    Vec2 q;

    friend bool operator==(const AgentState&, const AgentState&) = default;
};

/// Time derivative of an AgentState.
struct AgentRate {
    Vec2 dX;
    Vec2 dq;
};

struct SwarmState {
    double t{0.0};
    std::vector<AgentState> agents;

    std::size_t size() const noexcept { return agents.size(); }
};

/// Swarm states sampled on the uniform grid t_k = k T / K, k = 0..K.
struct Trajectory {
    std::vector<double> times;
    std::vector<SwarmState> states;

    std::size_t n_agents() const noexcept { return states.empty() ? 0 : states.front().size(); }
    std::size_t n_samples() const noexcept { return times.size(); }
    double dt() const noexcept { return times.size() > 1 ? times[1] - times[0] : 0.0; }
    const SwarmState& final_state() const { return states.back(); }

    std::vector<Vec2> positions_at(std::size_t k) const {
        std::vector<Vec2> out;
        out.reserve(n_agents());
        for (const auto& a : states[k].agents) out.push_back(a.X);
        return out;
    }
};

/// Number of intervals K with K * dt = T. Throws ConfigError when dt does not
/// divide T to within 1e-12.
inline std::size_t grid_intervals(double T, double dt) {
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("T must be positive", "T");
    if (!(dt > 0.0) || !std::isfinite(dt) || dt > T) throw ConfigError("dt must lie in (0, T]", "dt");
    const double k = std::round(T / dt);
    if (std::fabs(k * dt - T) > 1e-12) throw ConfigError("dt must divide T", "dt");
    return static_cast<std::size_t>(k);
}

inline std::vector<double> uniform_times(double T, double dt) {
    const std::size_t K = grid_intervals(T, dt);
    std::vector<double> times(K + 1);
    for (std::size_t k = 0; k <= K; ++k) times[k] = T * static_cast<double>(k) / static_cast<double>(K);
    times[K] = T;
    return times;
}

inline AgentRate rhs(const FlowSpec& flow, double t, const AgentState& s) {
    const Vec2 w = eval_flow(flow, t, s.X);
    const Mat2 J = eval_jacobian(flow, t, s.X);
    return {s.q + w, -(J.transposed() * s.q)};
}

inline std::vector<AgentRate> rhs(const FlowSpec& flow, const SwarmState& state) {
    std::vector<AgentRate> out;
    out.reserve(state.size());
    for (const auto& a : state.agents) out.push_back(rhs(flow, state.t, a));
    return out;
}

inline double hamiltonian(const FlowSpec& flow, double t, const AgentState& agent) {
    return 0.5 * norm_squared(agent.q) + dot(agent.q, eval_flow(flow, t, agent.X));
}

namespace detail {

using Packed = dopri5::State<4>;

inline Packed pack(const AgentState& s) noexcept { return {s.X.x, s.X.y, s.q.x, s.q.y}; }
inline AgentState unpack(const Packed& y) noexcept { return {{y[0], y[1]}, {y[2], y[3]}}; }

} // namespace detail

/// Accepted step meshes of an adaptive swarm run, one per agent.
using SwarmMesh = std::vector<dopri5::Mesh>;

/// Integrates one agent and writes its samples into column `agent` of `out`.
/// With `replay` set, the agent follows that recorded mesh instead of
/// choosing steps adaptively; otherwise accepted steps go to `record`.
inline void integrate_agent(const FlowSpec& flow, const AgentState& initial,
                            std::span<const double> times, std::size_t agent,
                            std::vector<SwarmState>& out, const IntegratorOptions& opts = {},
                            dopri5::Mesh* record = nullptr, const dopri5::Mesh* replay = nullptr) {
    auto f = [&flow](double t, const detail::Packed& y) -> detail::Packed {
        const AgentState s = detail::unpack(y);
        if (!is_finite(s.X) || !is_finite(s.q)) {
            constexpr double nan = std::numeric_limits<double>::quiet_NaN();
            return {nan, nan, nan, nan};
        }
        const AgentRate r = rhs(flow, t, s);
        return {r.dX.x, r.dX.y, r.dq.x, r.dq.y};
    };
    auto sink = [&out, agent](std::size_t k, const detail::Packed& y) {
        out[k].agents[agent] = detail::unpack(y);
    };
    if (replay)
        dopri5::replay<4>(f, times.front(), detail::pack(initial), times.back(), times, sink, *replay);
    else
        dopri5::integrate<4>(f, times.front(), detail::pack(initial), times.back(), times, sink, opts, record);
}

namespace detail {

inline Trajectory sampled_swarm(const SwarmState& initial, double T, double dt) {
    if (initial.agents.empty()) throw ConfigError("swarm must contain at least one agent", "n_agents");
    for (const auto& a : initial.agents)
        if (!is_finite(a.X) || !is_finite(a.q)) throw IntegrationError("non-finite initial state", 0.0);
    Trajectory traj;
    traj.times = uniform_times(T, dt);
    traj.states.resize(traj.times.size());
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        traj.states[k].t = traj.times[k];
        traj.states[k].agents.resize(initial.size());
    }
    return traj;
}

} // namespace detail

/// Adaptive Dormand-Prince integration of every agent over [0, T], sampled
/// with the 4th-order dense output on the uniform dt grid. The final sample
/// is the integrator's endpoint. Throws IntegrationError (with the failing
/// time) on step underflow or a non-finite state. The accepted step meshes
/// are stored in `record` when given.
inline Trajectory integrate(const FlowSpec& flow, const SwarmState& initial, double T, double dt,
                            const IntegratorOptions& opts = {}, SwarmMesh* record = nullptr) {
    Trajectory traj = detail::sampled_swarm(initial, T, dt);
    if (record) record->assign(initial.size(), {});
    for (std::size_t i = 0; i < initial.size(); ++i)
        integrate_agent(flow, initial.agents[i], traj.times, i, traj.states, opts, record ? &(*record)[i] : nullptr);
    return traj;
}

/// Integration along meshes recorded by integrate over the same [0, T].
inline Trajectory integrate_on_mesh(const FlowSpec& flow, const SwarmState& initial, double T, double dt,
                                    const SwarmMesh& mesh) {
    if (mesh.size() != initial.size()) throw ConfigError("step mesh does not match the swarm size");
    Trajectory traj = detail::sampled_swarm(initial, T, dt);
    for (std::size_t i = 0; i < initial.size(); ++i)
        integrate_agent(flow, initial.agents[i], traj.times, i, traj.states, {}, nullptr, &mesh[i]);
    return traj;
}

/// Swarm at t = 0 from positions and initial controls.
inline SwarmState make_swarm(std::span<const Vec2> positions, std::span<const Vec2> controls) {
    if (positions.size() != controls.size())
        throw ConfigError("positions and controls differ in length");
    SwarmState s;
    s.agents.reserve(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) s.agents.push_back({positions[i], controls[i]});
    return s;
}

/// Constant-velocity paths X(t) = x0 + (t / T)(x1 - x0). The control entries
/// hold X' - w(t, X) so the baseline can be reported like an optimized path.
inline Trajectory straight_line_trajectory(std::span<const Vec2> x0, std::span<const Vec2> x1,
                                           double T, double dt, const FlowSpec& flow = {}) {
    if (x0.size() != x1.size()) throw ConfigError("straight line endpoints differ in length");
    Trajectory traj;
    traj.times = uniform_times(T, dt);
    traj.states.resize(traj.times.size());
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const double t = traj.times[k];
        auto& st = traj.states[k];
        st.t = t;
        st.agents.resize(x0.size());
        for (std::size_t i = 0; i < x0.size(); ++i) {
            const Vec2 v = (1.0 / T) * (x1[i] - x0[i]);
            const Vec2 X = k + 1 == traj.times.size() ? x1[i] : x0[i] + (t / T) * (x1[i] - x0[i]);
            st.agents[i] = {X, v - eval_flow(flow, t, X)};
        }
    }
    return traj;
}

inline Trajectory straight_line_trajectory(Vec2 x0, Vec2 x1, double T, double dt,
                                           const FlowSpec& flow = {}) {
    const Vec2 a[1] = {x0};
    const Vec2 b[1] = {x1};
    return straight_line_trajectory(std::span<const Vec2>(a), std::span<const Vec2>(b), T, dt, flow);
}

} // namespace whf
