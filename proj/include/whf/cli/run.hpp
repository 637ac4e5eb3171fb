#pragma once

#include "whf/cli/config.hpp"
#include "whf/io.hpp"
#include "whf/linear_oracle.hpp"
#include "whf/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

/// \file run.hpp
/// Subcommand runners. Each returns a JSON report plus an exit code and
/// writes its artifacts under the configured output directory.

namespace whf::cli {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumerical = 2, kExitIo = 3 };

struct RunOutcome {
    json report;
    int exit_code{kExitOk};
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json points_json(std::span<const Vec2> pts) {
    json a = json::array();
    for (Vec2 p : pts) a.push_back(vec2_json(p));
    return a;
}

/// Collects written files (relative to the output root) for the report.
class Emitter {
public:
    explicit Emitter(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const noexcept { return root_; }
    const json& files() const noexcept { return files_; }

    template <class Fill>
    void file(const std::string& name, Fill&& fill) {
        write_file(root_ / name, std::forward<Fill>(fill));
        files_.push_back(name);
    }
    void trajectory(const std::string& name, const Trajectory& t) {
        file(name, [&](std::ostream& os) { write_trajectory_csv(os, t); });
    }
    void density(const std::string& name, const DensityGrid& d) {
        file(name, [&](std::ostream& os) { write_density_csv(os, d); });
    }
    void report(json& report) {
        files_.push_back("report.json");
        report["files"] = files_;
        write_file(root_ / "report.json", [&](std::ostream& os) { os << report.dump(2) << '\n'; });
    }

private:
    std::filesystem::path root_;
    json files_ = json::array();
};

} // namespace detail

/// Result of one shooting solve plus the metrics reported for it.
struct PlanOutcome {
    OptimResult result;
    ObjectiveReport initial;
    ObjectiveReport final;
    Trajectory straight;
    double E_whf{std::numeric_limits<double>::quiet_NaN()};
    double E_str{std::numeric_limits<double>::quiet_NaN()};
    /// NaN when E_str is zero (no displacement to compare against).
    double savings{std::numeric_limits<double>::quiet_NaN()};
    std::string strategy{"direct"};
    double wall_time{0.0};
};

/// Energy of the optimized run and of the straight-line baseline from each
/// agent's start to the terminal point it actually reached.
inline void fill_metrics(PlanOutcome& out, const ObjectiveContext& ctx) {
    out.final = evaluate(out.result.x, ctx);
    if (out.final.failed) throw DomainError("optimized controls cannot be evaluated: " + out.final.failure);
    out.E_whf = control_energy(out.final.trajectory, ctx.flow);
    const auto reached = out.final.trajectory.positions_at(out.final.trajectory.n_samples() - 1);
    out.straight = straight_line_trajectory(ctx.initial_positions, reached, ctx.T, ctx.dt, ctx.flow);
    out.E_str = control_energy(out.straight, ctx.flow);
    out.savings = out.E_str > 0.0 ? savings(out.E_whf, out.E_str) : std::numeric_limits<double>::quiet_NaN();
}

inline PlanOutcome solve_plan(const ObjectiveContext& ctx, const OptimizerOptions& opts,
                              std::vector<double> q0_init) {
    const auto t0 = std::chrono::steady_clock::now();
    PlanOutcome out;
    out.initial = evaluate(q0_init, ctx);
    out.result = minimize_objective(ctx, std::move(q0_init), opts);
    if (out.result.reason == StopReason::EvaluationFailure)
        throw DomainError("objective cannot be evaluated at the initial controls: " + out.initial.failure);
    fill_metrics(out, ctx);
    out.wall_time = detail::seconds_since(t0);
    return out;
}

inline json optim_json(const OptimResult& r) {
    return json{{"objective_final", r.f},
                {"objective_history", r.objective_history},
                {"grad_norm_final", detail::number_or_null(r.grad_norm_final)},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"stop_reason", std::string(to_string(r.reason))},
                {"function_evaluations", r.function_evaluations},
                {"gradient_evaluations", r.gradient_evaluations},
                {"q0_opt", r.x},
                {"wall_time", r.wall_time}};
}

inline json plan_json(const PlanOutcome& p) {
    json j = optim_json(p.result);
    j["E_whf"] = p.E_whf;
    j["E_str"] = p.E_str;
    j["savings"] = detail::number_or_null(p.savings);
    j["kl_initial"] = p.initial.failed ? json(nullptr) : json(p.initial.kl_term);
    j["objective_initial"] = p.initial.value;
    j["kl_final"] = p.final.kl_term;
    j["penalty_final"] = p.final.penalty_term;
    j["final_positions"] = detail::points_json(p.final.trajectory.positions_at(p.final.trajectory.n_samples() - 1));
    j["strategy"] = p.strategy;
    j["wall_time"] = p.wall_time;
    return j;
}

inline json base_report(Command cmd, const RunConfig& cfg) {
    return json{{"command", std::string(to_string(cmd))}, {"config", to_json(cfg)}, {"status", "ok"}};
}

/// Runs `body`, turning exceptions into a failed report with the matching
/// exit code. Files written before the failure stay on disk and are listed.
template <class Body>
RunOutcome guarded(Command cmd, const RunConfig& cfg, Body&& body) {
    RunOutcome out;
    out.report = base_report(cmd, cfg);
    detail::Emitter emit(cfg.output_dir);
    auto fail = [&](const std::exception& e, int code) {
        out.report["status"] = "failed";
        out.report["failure"] = e.what();
        out.exit_code = code;
    };
    try {
        out.exit_code = body(out.report, emit);
    } catch (const ConfigError& e) {
        fail(e, kExitConfig);
    } catch (const IoError& e) {
        fail(e, kExitIo);
        return out;
    } catch (const std::exception& e) {
        fail(e, kExitNumerical);
    }
    try {
        emit.report(out.report);
    } catch (const IoError& e) {
        out.report["status"] = "failed";
        out.report["failure"] = e.what();
        out.exit_code = kExitIo;
    }
    return out;
}

inline RunOutcome run_plan(const RunConfig& cfg) {
    return guarded(Command::Plan, cfg, [&](json& report, detail::Emitter& emit) {
        const ObjectiveContext ctx = make_objective_context(cfg, cfg.n_agents);
        emit.density("target_density.csv", ctx.target->density());
        const PlanOutcome p = solve_plan(ctx, cfg.optimizer, std::vector<double>(ctx.dimension(), 0.0));
        report.update(plan_json(p));
        report["initial_positions"] = detail::points_json(ctx.initial_positions);
        emit.trajectory("trajectory.csv", p.final.trajectory);
        emit.trajectory("straight_trajectory.csv", p.straight);
        emit.density("final_density.csv",
                     kde(p.final.trajectory.positions_at(p.final.trajectory.n_samples() - 1), ctx.sigma, ctx.grid));
        return int{kExitOk};
    });
}

inline RunOutcome run_sweep(const RunConfig& cfg) {
    return guarded(Command::Sweep, cfg, [&](json& report, detail::Emitter& emit) {
        json rows = json::array();
        std::string csv = "N,E_whf,E_str,savings,kl_final,penalty_final,iterations,converged,stop_reason,wall_time\n";
        for (std::size_t n : cfg.sweep_sizes) {
            const ObjectiveContext ctx = make_objective_context(cfg, n);
            const PlanOutcome p = solve_plan(ctx, cfg.optimizer, std::vector<double>(ctx.dimension(), 0.0));
            const std::string dir = "N" + std::to_string(n) + "/";
            emit.trajectory(dir + "trajectory.csv", p.final.trajectory);
            emit.density(dir + "final_density.csv",
                         kde(p.final.trajectory.positions_at(p.final.trajectory.n_samples() - 1), ctx.sigma, ctx.grid));
            json row = plan_json(p);
            row["N"] = n;
            rows.push_back(row);
            csv += std::to_string(n) + ',' + format_number(p.E_whf) + ',' + format_number(p.E_str) + ',' +
                   format_number(p.savings) + ',' + format_number(p.final.kl_term) + ',' +
                   format_number(p.final.penalty_term) + ',' + std::to_string(p.result.iterations) + ',' +
                   (p.result.converged ? "true" : "false") + ',' + std::string(to_string(p.result.reason)) + ',' +
                   format_number(p.wall_time) + '\n';
        }
        emit.file("sweep.csv", [&](std::ostream& os) { os << csv; });
        report["runs"] = rows;
        return int{kExitOk};
    });
}

/// Equal-width histogram over the finite values; ceil(sqrt(count)) bins.
struct HistogramBin {
    double lo;
    double hi;
    std::size_t count;
};

inline std::vector<HistogramBin> histogram(const std::vector<double>& values) {
    std::vector<double> v;
    for (double x : values)
        if (std::isfinite(x)) v.push_back(x);
    if (v.empty()) return {};
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn, hi = *mx;
    const std::size_t bins = lo == hi ? 1 : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(v.size()))));
    const double width = lo == hi ? 1.0 : (hi - lo) / static_cast<double>(bins);
    std::vector<HistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) out[b] = {lo + width * b, b + 1 == bins ? (lo == hi ? lo : hi) : lo + width * (b + 1), 0};
    for (double x : v) {
        std::size_t b = lo == hi ? 0 : static_cast<std::size_t>((x - lo) / width);
        ++out[std::min(b, bins - 1)].count;
    }
    return out;
}

inline RunOutcome run_montecarlo(const RunConfig& cfg) {
    return guarded(Command::MonteCarlo, cfg, [&](json& report, detail::Emitter& emit) {
        const auto t0 = std::chrono::steady_clock::now();
        const ObjectiveContext ctx = make_objective_context(cfg, cfg.n_agents);
        emit.density("target_density.csv", ctx.target->density());
        const auto records = monte_carlo_study(ctx, cfg.trials, cfg.seed, cfg.optimizer, cfg.threads);

        std::string trials = "trial,seed,initial_objective,final_objective,E_whf,iterations,converged,stop_reason,"
                             "failed,wall_time\n";
        std::string scatter = "trial,agent,qx_init,qy_init,qx_opt,qy_opt\n";
        json rows = json::array();
        std::vector<double> energies;
        std::size_t failed = 0;
        for (const auto& r : records) {
            failed += r.failed ? 1 : 0;
            energies.push_back(r.E_whf);
            trials += std::to_string(r.trial) + ',' + std::to_string(r.seed) + ',' + format_number(r.initial_objective) +
                      ',' + format_number(r.final_objective) + ',' + format_number(r.E_whf) + ',' +
                      std::to_string(r.iterations) + ',' + (r.converged ? "true" : "false") + ',' +
                      std::string(to_string(r.reason)) + ',' + (r.failed ? "true" : "false") + ',' +
                      format_number(r.wall_time) + '\n';
            for (std::size_t i = 0; 2 * i + 1 < r.q0_init.size(); ++i) {
                const bool has_opt = r.q0_opt.size() == r.q0_init.size();
                const double nan = std::numeric_limits<double>::quiet_NaN();
                scatter += std::to_string(r.trial) + ',' + std::to_string(i) + ',' + format_number(r.q0_init[2 * i]) +
                           ',' + format_number(r.q0_init[2 * i + 1]) + ',' +
                           format_number(has_opt ? r.q0_opt[2 * i] : nan) + ',' +
                           format_number(has_opt ? r.q0_opt[2 * i + 1] : nan) + '\n';
            }
            rows.push_back(json{{"trial", r.trial},
                                {"seed", r.seed},
                                {"q0_init", r.q0_init},
                                {"q0_opt", r.q0_opt},
                                {"initial_objective", detail::number_or_null(r.initial_objective)},
                                {"final_objective", detail::number_or_null(r.final_objective)},
                                {"E_whf", detail::number_or_null(r.E_whf)},
                                {"iterations", r.iterations},
                                {"converged", r.converged},
                                {"stop_reason", std::string(to_string(r.reason))},
                                {"failed", r.failed},
                                {"failure", r.failure},
                                {"wall_time", r.wall_time}});
        }
        std::string hist = "bin,lo,hi,count\n";
        const auto bins = histogram(energies);
        for (std::size_t b = 0; b < bins.size(); ++b)
            hist += std::to_string(b) + ',' + format_number(bins[b].lo) + ',' + format_number(bins[b].hi) + ',' +
                    std::to_string(bins[b].count) + '\n';
        emit.file("trials.csv", [&](std::ostream& os) { os << trials; });
        emit.file("q0_scatter.csv", [&](std::ostream& os) { os << scatter; });
        emit.file("energy_histogram.csv", [&](std::ostream& os) { os << hist; });
        report["initial_positions"] = detail::points_json(ctx.initial_positions);
        report["trials"] = rows;
        report["failed_trials"] = failed;
        report["wall_time"] = detail::seconds_since(t0);
        if (failed) {
            report["status"] = "failed";
            report["failure"] = std::to_string(failed) + " trial(s) failed";
            return int{kExitNumerical};
        }
        return int{kExitOk};
    });
}

inline json stages_json(const HomotopyResult& h) {
    json a = json::array();
    for (const auto& s : h.stages)
        a.push_back(json{{"alpha", s.alpha},
                         {"restarted_from_zero", s.restarted_from_zero},
                         {"q0_start", s.q0_start},
                         {"result", optim_json(s.result)}});
    return a;
}

inline RunOutcome run_homotopy(const RunConfig& cfg) {
    return guarded(Command::Homotopy, cfg, [&](json& report, detail::Emitter& emit) {
        const ObjectiveContext ctx = make_objective_context(cfg, cfg.n_agents);
        emit.density("target_density.csv", ctx.target->density());
        const std::vector<double> zeros(ctx.dimension(), 0.0);
        const std::vector<double> direct_schedule{1.0};

        auto run = [&](const std::vector<double>& schedule, const char* label, json& out) {
            const auto t0 = std::chrono::steady_clock::now();
            HomotopyResult h = homotopy_solve(ctx, schedule, zeros, cfg.optimizer);
            PlanOutcome p;
            p.result = h.final;
            p.initial = evaluate(zeros, ctx);
            p.strategy = label;
            fill_metrics(p, ctx);
            p.wall_time = detail::seconds_since(t0);
            out = plan_json(p);
            out["schedule"] = schedule;
            out["stages"] = stages_json(h);
            return p;
        };
        json direct_json, staged_json;
        const PlanOutcome direct = run(direct_schedule, "direct", direct_json);
        const PlanOutcome staged = run(cfg.homotopy, "homotopy", staged_json);

        emit.trajectory("direct_trajectory.csv", direct.final.trajectory);
        emit.trajectory("trajectory.csv", staged.final.trajectory);
        emit.trajectory("straight_trajectory.csv", staged.straight);
        emit.density("final_density.csv", kde(staged.final.trajectory.positions_at(staged.final.trajectory.n_samples() - 1),
                                              ctx.sigma, ctx.grid));
        std::string stages = "stage,alpha,objective,iterations,converged,stop_reason,restarted_from_zero\n";
        const auto& st = staged_json["stages"];
        for (std::size_t i = 0; i < st.size(); ++i)
            stages += std::to_string(i) + ',' + format_number(st[i]["alpha"].get<double>()) + ',' +
                      format_number(st[i]["result"]["objective_final"].get<double>()) + ',' +
                      std::to_string(st[i]["result"]["iterations"].get<std::size_t>()) + ',' +
                      (st[i]["result"]["converged"].get<bool>() ? "true" : "false") + ',' +
                      st[i]["result"]["stop_reason"].get<std::string>() + ',' +
                      (st[i]["restarted_from_zero"].get<bool>() ? "true" : "false") + '\n';
        emit.file("stages.csv", [&](std::ostream& os) { os << stages; });
        report["direct"] = direct_json;
        report["homotopy"] = staged_json;
        report["E_whf_direct"] = direct.E_whf;
        report["E_whf_homotopy"] = staged.E_whf;
        report["energy_improvement"] = direct.E_whf - staged.E_whf;
        return int{kExitOk};
    });
}

/// Single-agent benchmark settings: start (-10, 10), Gaussian target of
/// width 10 at (10, -10), sigma = 1.
inline RunConfig table1_config(const RunConfig& base, FlowKind kind) {
    RunConfig c = base;
    c.flow = FlowSpec::of(kind);
    c.initial = PointInitial{{-10.0, 10.0}};
    c.target = PointGaussianTarget{{10.0, -10.0}, 10.0};
    c.n_agents = 1;
    c.sigma = 1.0;
    return c;
}

/// Solves one benchmark row twice: directly from zero controls and by
/// continuation along `continuation`, keeping whichever reaches the lower
/// objective (the direct solve on ties). Strongly oscillating flows such as
/// the gyre give a rough objective in which the direct solve can stall far
/// from the branch that continuation tracks out of the flow-free problem.
inline PlanOutcome solve_table1_row(const ObjectiveContext& ctx, const OptimizerOptions& opts,
                                    const std::vector<double>& continuation) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> zeros(ctx.dimension(), 0.0);
    PlanOutcome best = solve_plan(ctx, opts, zeros);
    if (!(continuation.size() == 1 && continuation[0] == 1.0)) {
        const HomotopyResult h = homotopy_solve(ctx, continuation, zeros, opts);
        const double tie = 1e-9 * (1.0 + std::fabs(best.result.f));
        if (h.final.reason != StopReason::EvaluationFailure && h.final.f < best.result.f - tie) {
            PlanOutcome alt;
            alt.result = h.final;
            for (const auto& s : h.stages) {
                if (&s == &h.stages.back()) break;
                alt.result.iterations += s.result.iterations;
                alt.result.function_evaluations += s.result.function_evaluations;
                alt.result.gradient_evaluations += s.result.gradient_evaluations;
            }
            alt.initial = best.initial;
            alt.strategy = "continuation";
            fill_metrics(alt, ctx);
            best = std::move(alt);
        }
    }
    best.wall_time = detail::seconds_since(t0);
    return best;
}

inline RunOutcome run_table1(const RunConfig& cfg) {
    return guarded(Command::Table1, cfg, [&](json& report, detail::Emitter& emit) {
        std::string csv = "flow,E_whf,E_str,savings,objective,kl_final,iterations,converged,stop_reason,strategy,runtime_s\n";
        json rows = json::array();
        for (FlowKind kind : kCatalogFlows) {
            const RunConfig c = table1_config(cfg, kind);
            const ObjectiveContext ctx = make_objective_context(c, 1);
            const PlanOutcome p = solve_table1_row(ctx, c.optimizer, c.table1_continuation);
            const std::string name(to_string(kind));
            emit.trajectory(name + "_trajectory.csv", p.final.trajectory);
            emit.trajectory(name + "_straight_trajectory.csv", p.straight);
            json row = plan_json(p);
            row["flow"] = name;
            rows.push_back(row);
            csv += name + ',' + format_number(p.E_whf) + ',' + format_number(p.E_str) + ',' + format_number(p.savings) +
                   ',' + format_number(p.result.f) + ',' + format_number(p.final.kl_term) + ',' +
                   std::to_string(p.result.iterations) + ',' + (p.result.converged ? "true" : "false") + ',' +
                   std::string(to_string(p.result.reason)) + ',' + p.strategy + ',' + format_number(p.wall_time) + '\n';
        }
        emit.file("table1.csv", [&](std::ostream& os) { os << csv; });
        report["rows"] = rows;
        return int{kExitOk};
    });
}

/// One linear-flow round trip: shoot with the closed-form q(0), integrate,
/// and compare landing point and energies with the closed form.
struct LinearCheck {
    Mat2 A;
    Vec2 xi;
    Vec2 x1;
    double landing_error{0.0};
    /// control_energy of the integrated trajectory against 2 E_min.
    double energy_rel_error{0.0};
    /// (1/2) int |q|^2 dt (Simpson on the samples) against E_min.
    double action_rel_error{0.0};
    double gramian_asymmetry{0.0};
    double gramian_min_eigenvalue{0.0};
    /// max entry of exp(A) exp(-A) - I.
    double exp_inverse_error{0.0};
    bool pass{false};
};

struct LinearSuiteTolerances {
    double landing{1e-6};
    double energy{1e-2};
    double action{1e-5};
    double exp_inverse{1e-10};
    double symmetry{1e-12};
};

inline double simpson(const std::vector<double>& f, double h) {
    const std::size_t K = f.size() - 1;
    if (K % 2 != 0 || K < 2) {
        double s = 0.0;
        for (std::size_t k = 1; k <= K; ++k) s += 0.5 * (f[k] + f[k - 1]) * h;
        return s;
    }
    double s = f.front() + f.back();
    for (std::size_t k = 1; k < K; ++k) s += (k % 2 ? 4.0 : 2.0) * f[k];
    return s * h / 3.0;
}

inline LinearCheck linear_round_trip(const Mat2& A, Vec2 xi, Vec2 x1, double dt = 0.001,
                                     const LinearSuiteTolerances& tol = {}) {
    LinearCheck c{A, xi, x1};
    const LinearFlowSolution sol = solve_linear(A, xi, x1);
    const FlowSpec flow = FlowSpec::linear(A);
    const Trajectory traj = integrate(flow, make_swarm(std::vector<Vec2>{xi}, std::vector<Vec2>{sol.q0}), 1.0, dt);
    c.landing_error = norm(traj.final_state().agents[0].X - x1);
    const double twice = 2.0 * sol.E_min;
    c.energy_rel_error = std::fabs(control_energy(traj, flow) - twice) / twice;
    std::vector<double> half_q2(traj.n_samples());
    for (std::size_t k = 0; k < half_q2.size(); ++k) half_q2[k] = 0.5 * norm_squared(traj.states[k].agents[0].q);
    c.action_rel_error = std::fabs(simpson(half_q2, dt) - sol.E_min) / sol.E_min;
    c.gramian_asymmetry = std::fabs(sol.C.a12 - sol.C.a21);
    const double tr = sol.C.trace(), det = sol.C.det();
    c.gramian_min_eigenvalue = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    c.exp_inverse_error = max_abs(matrix_exp(A, 1.0) * matrix_exp(A, -1.0) - Mat2::identity());
    c.pass = c.landing_error <= tol.landing && c.energy_rel_error <= tol.energy && c.action_rel_error <= tol.action &&
             c.exp_inverse_error <= tol.exp_inverse && c.gramian_asymmetry <= tol.symmetry &&
             c.gramian_min_eigenvalue > 0.0;
    return c;
}

/// `count` cases with A entries in [-1, 1] (so |A| <= 2) and endpoints in
/// [-10, 10]^2, drawn from the seeded stream.
inline std::vector<LinearCheck> linear_round_trip_suite(std::uint64_t seed, std::size_t count = 20,
                                                        double dt = 0.001) {
    Rng rng(seed);
    std::vector<LinearCheck> out;
    for (std::size_t k = 0; k < count; ++k) {
        Mat2 A{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Vec2 xi{rng.uniform(-10, 10), rng.uniform(-10, 10)};
        Vec2 x1{rng.uniform(-10, 10), rng.uniform(-10, 10)};
        out.push_back(linear_round_trip(A, xi, x1, dt));
    }
    return out;
}

inline RunOutcome run_verify_linear(const RunConfig& cfg) {
    return guarded(Command::VerifyLinear, cfg, [&](json& report, detail::Emitter& emit) {
        const auto checks = linear_round_trip_suite(cfg.seed, 20, cfg.dt);
        std::string csv = "case,a11,a12,a21,a22,landing_error,energy_rel_error,action_rel_error,gramian_min_eigenvalue,"
                          "exp_inverse_error,pass\n";
        std::size_t failed = 0;
        json rows = json::array();
        for (std::size_t k = 0; k < checks.size(); ++k) {
            const auto& c = checks[k];
            failed += c.pass ? 0 : 1;
            csv += std::to_string(k) + ',' + format_number(c.A.a11) + ',' + format_number(c.A.a12) + ',' +
                   format_number(c.A.a21) + ',' + format_number(c.A.a22) + ',' + format_number(c.landing_error) + ',' +
                   format_number(c.energy_rel_error) + ',' + format_number(c.action_rel_error) + ',' +
                   format_number(c.gramian_min_eigenvalue) + ',' + format_number(c.exp_inverse_error) + ',' +
                   (c.pass ? "true" : "false") + '\n';
            rows.push_back(json{{"landing_error", c.landing_error},
                                {"energy_rel_error", c.energy_rel_error},
                                {"action_rel_error", c.action_rel_error},
                                {"gramian_min_eigenvalue", c.gramian_min_eigenvalue},
                                {"exp_inverse_error", c.exp_inverse_error},
                                {"pass", c.pass}});
        }
        emit.file("verify_linear.csv", [&](std::ostream& os) { os << csv; });
        report["checks"] = rows;
        report["failed_checks"] = failed;
        if (failed) {
            report["status"] = "failed";
            report["failure"] = std::to_string(failed) + " linear check(s) out of tolerance";
            return int{kExitNumerical};
        }
        return int{kExitOk};
    });
}

inline RunOutcome execute(Command cmd, const RunConfig& cfg) {
    switch (cmd) {
    case Command::Plan: return run_plan(cfg);
    case Command::Sweep: return run_sweep(cfg);
    case Command::MonteCarlo: return run_montecarlo(cfg);
    case Command::Homotopy: return run_homotopy(cfg);
    case Command::Table1: return run_table1(cfg);
    case Command::VerifyLinear: return run_verify_linear(cfg);
    }
    return run_plan(cfg);
}

} // namespace whf::cli
