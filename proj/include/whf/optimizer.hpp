#pragma once

#include "whf/lbfgs.hpp"
#include "whf/objective.hpp"
#include "whf/parallel.hpp"
#include "whf/random.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

/// \file optimizer.hpp
/// Shooting solves over q0: single L-BFGS runs, homotopy continuation in the
/// flow strength, and seeded multi-start studies.

namespace whf {

/// Adapts an ObjectiveContext to the (f, g) callables of lbfgs_minimize. The
/// last evaluation is cached so the gradient at the same point reuses its
/// value and step meshes. Failed evaluations surface as non-finite values.
class ShootingObjective {
public:
    explicit ShootingObjective(const ObjectiveContext& ctx) : ctx_(&ctx) {}

    double value(std::span<const double> x) {
        auto rep = evaluate(x, *ctx_);
        rep.trajectory = {};
        std::lock_guard lock(mutex_);
        last_x_.assign(x.begin(), x.end());
        last_ = std::move(rep);
        return last_.failed ? std::numeric_limits<double>::infinity() : last_.value;
    }

    std::vector<double> gradient(std::span<const double> x) {
        std::optional<ObjectiveReport> base;
        {
            std::lock_guard lock(mutex_);
            if (last_x_.size() == x.size() && std::equal(last_x_.begin(), last_x_.end(), x.begin()) && !last_.failed)
                base = last_;
        }
        auto res = gradient_fd(x, *ctx_, base ? &*base : nullptr);
        if (!res.ok) res.gradient.assign(x.size(), std::numeric_limits<double>::quiet_NaN());
        return std::move(res.gradient);
    }

private:
    const ObjectiveContext* ctx_;
    std::mutex mutex_;
    std::vector<double> last_x_;
    ObjectiveReport last_;
};

/// L-BFGS on J(q0) for the given context.
inline OptimResult minimize_objective(const ObjectiveContext& ctx, std::vector<double> q0_init,
                                      const OptimizerOptions& opts = {}) {
    ctx.validate();
    if (q0_init.size() != ctx.dimension()) throw ConfigError("q0 must hold one 2-vector per agent", "q0");
    ShootingObjective obj(ctx);
    return lbfgs_minimize([&](std::span<const double> x) { return obj.value(x); },
                          [&](std::span<const double> x) { return obj.gradient(x); }, std::move(q0_init),
                          opts);
}

struct HomotopyStage {
    double alpha{1.0};
    /// The warm start was infeasible and the stage restarted from zero.
    bool restarted_from_zero{false};
    std::vector<double> q0_start;
    OptimResult result;
};

struct HomotopyResult {
    OptimResult final;
    std::vector<HomotopyStage> stages;
};

inline void validate_schedule(std::span<const double> alphas) {
    if (alphas.empty()) throw ConfigError("homotopy schedule must not be empty", "homotopy");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] >= 0.0 && alphas[i] <= 1.0))
            throw ConfigError("homotopy alphas must lie in [0, 1]", "homotopy");
        if (i > 0 && !(alphas[i] > alphas[i - 1]))
            throw ConfigError("homotopy alphas must be strictly ascending", "homotopy");
    }
    if (alphas.back() != 1.0) throw ConfigError("homotopy schedule must end at 1", "homotopy");
}

/// Solves the problems with flow alpha * w for each alpha in order, starting
/// each stage from the previous optimum. alpha = 0 is the zero flow (the
/// classical transport problem). A stage whose warm start cannot be
/// evaluated restarts from zero controls.
inline HomotopyResult homotopy_solve(const ObjectiveContext& ctx, std::span<const double> alphas,
                                     std::vector<double> q0_init, const OptimizerOptions& opts = {}) {
    validate_schedule(alphas);
    HomotopyResult out;
    std::vector<double> warm = std::move(q0_init);
    for (double a : alphas) {
        ObjectiveContext stage_ctx = ctx;
        stage_ctx.flow = ctx.flow.scaled(a * ctx.flow.alpha);
        HomotopyStage stage;
        stage.alpha = a;
        if (evaluate(warm, stage_ctx).failed) {
            std::fill(warm.begin(), warm.end(), 0.0);
            stage.restarted_from_zero = true;
        }
        stage.q0_start = warm;
        stage.result = minimize_objective(stage_ctx, warm, opts);
        warm = stage.result.x;
        out.stages.push_back(std::move(stage));
    }
    out.final = out.stages.back().result;
    return out;
}

/// Initial controls q0_i ~ U(-1, 1)^2 from the seeded stream.
inline std::vector<double> uniform_controls(std::size_t n_agents, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> q(2 * n_agents);
    for (double& v : q) v = rng.uniform(-1.0, 1.0);
    return q;
}

struct TrialRecord {
    std::size_t trial{0};
    std::uint64_t seed{0};
    std::vector<double> q0_init;
    std::vector<double> q0_opt;
    double initial_objective{std::numeric_limits<double>::quiet_NaN()};
    double final_objective{std::numeric_limits<double>::quiet_NaN()};
    double E_whf{std::numeric_limits<double>::quiet_NaN()};
    std::size_t iterations{0};
    bool converged{false};
    StopReason reason{StopReason::MaxIterations};
    double wall_time{0.0};
    bool failed{false};
    std::string failure;
};

/// M independent optimizations from random controls; trial k uses seed
/// base_seed + k. Trials run on `trial_threads` workers (gradient probes then
/// run serially inside each trial) and come back ordered by trial index.
/// A trial that throws is recorded as failed; the study continues.
inline std::vector<TrialRecord> monte_carlo_study(const ObjectiveContext& ctx, std::size_t M,
                                                  std::uint64_t base_seed, const OptimizerOptions& opts = {},
                                                  std::size_t trial_threads = 1) {
    if (M < 1) throw ConfigError("trials must be at least 1", "trials");
    ctx.validate();
    ObjectiveContext inner = ctx;
    if (resolve_threads(trial_threads) > 1) inner.threads = 1;

    std::vector<TrialRecord> records(M);
    parallel_for(M, trial_threads, [&](std::size_t k) {
        TrialRecord& rec = records[k];
        rec.trial = k;
        rec.seed = base_seed + k;
        rec.q0_init = uniform_controls(inner.n_agents(), rec.seed);
        try {
            const auto res = minimize_objective(inner, rec.q0_init, opts);
            rec.q0_opt = res.x;
            rec.initial_objective = res.objective_history.front();
            rec.final_objective = res.f;
            rec.iterations = res.iterations;
            rec.converged = res.converged;
            rec.reason = res.reason;
            rec.wall_time = res.wall_time;
            const auto final_rep = evaluate(res.x, inner);
            if (final_rep.failed) {
                rec.failed = true;
                rec.failure = final_rep.failure;
            } else {
                rec.E_whf = control_energy(final_rep.trajectory, inner.flow);
            }
            if (res.reason == StopReason::EvaluationFailure) {
                rec.failed = true;
                rec.failure = "objective could not be evaluated at the initial controls";
            }
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.failure = e.what();
        }
    });
    return records;
}

} // namespace whf
