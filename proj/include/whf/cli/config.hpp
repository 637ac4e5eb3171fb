#pragma once

#include "whf/density.hpp"
#include "whf/errors.hpp"
#include "whf/flowfield.hpp"
#include "whf/lbfgs.hpp"
#include "whf/objective.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

/// \file config.hpp
/// JSON run configuration: parsing with unknown-key rejection, defaults that
/// depend on the subcommand, and serialization of the resolved form.

namespace whf::cli {

using json = nlohmann::json;

enum class Command { Plan, Sweep, MonteCarlo, Homotopy, Table1, VerifyLinear };

inline std::string_view to_string(Command c) noexcept {
    switch (c) {
    case Command::Plan: return "plan";
    case Command::Sweep: return "sweep";
    case Command::MonteCarlo: return "montecarlo";
    case Command::Homotopy: return "homotopy";
    case Command::Table1: return "table1";
    case Command::VerifyLinear: return "verify-linear";
    }
    return "plan";
}

inline constexpr const char* kOutputDirEnv = "WHF_OUTPUT_DIR";

struct RunConfig {
    FlowSpec flow{FlowSpec::of(FlowKind::Circle)};
    InitialSpec initial{PointInitial{}};
    TargetSpec target{PointGaussianTarget{}};
    std::size_t n_agents{1};
    double sigma{1.0};
    double lambda_b{10.0};
    double D{20.0};
    double T{1.0};
    double dt{0.001};
    GridSpec grid{};
    OptimizerOptions optimizer{};
    GradientMode gradient{GradientMode::Forward};
    IntegratorOptions integrator{};
    std::vector<double> homotopy{0.75, 1.0};
    std::vector<double> table1_continuation{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<std::size_t> sweep_sizes{1, 5, 10, 25, 50};
    std::uint64_t seed{0};
    std::size_t trials{20};
    std::size_t threads{0};
    std::string output_dir{"whf_output"};

    void validate() const {
        flow.validate();
        whf::validate(initial);
        whf::validate(target);
        if (n_agents < 1) throw ConfigError("n_agents must be at least 1", "n_agents");
        if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0", "sigma");
        if (!(lambda_b >= 0.0)) throw ConfigError("lambda_b must be >= 0", "lambda_b");
        if (!(D > 0.0)) throw ConfigError("D must be > 0", "D");
        if (!(T > 0.0)) throw ConfigError("T must be > 0", "T");
        if (!(dt > 0.0)) throw ConfigError("dt must be > 0", "dt");
        grid_intervals(T, dt);
        grid.validate();
        optimizer.validate();
        if (!(integrator.abs_tol > 0.0)) throw ConfigError("integrator abs_tol must be > 0", "integrator.abs_tol");
        if (!(integrator.rel_tol >= 0.0)) throw ConfigError("integrator rel_tol must be >= 0", "integrator.rel_tol");
        validate_schedule(homotopy, "homotopy");
        validate_schedule(table1_continuation, "table1_continuation");
        if (sweep_sizes.empty()) throw ConfigError("sweep_sizes must not be empty", "sweep_sizes");
        for (std::size_t n : sweep_sizes)
            if (n < 1) throw ConfigError("sweep_sizes entries must be at least 1", "sweep_sizes");
        if (trials < 1) throw ConfigError("trials must be at least 1", "trials");
        if (output_dir.empty()) throw ConfigError("output_dir must not be empty", "output_dir");
    }

    static void validate_schedule(const std::vector<double>& a, const char* key) {
        if (a.empty()) throw ConfigError(std::string(key) + " must not be empty", key);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!(a[i] >= 0.0 && a[i] <= 1.0)) throw ConfigError(std::string(key) + " entries must lie in [0, 1]", key);
            if (i > 0 && !(a[i] > a[i - 1]))
                throw ConfigError(std::string(key) + " must be strictly ascending", key);
        }
        if (a.back() != 1.0) throw ConfigError(std::string(key) + " must end at 1", key);
    }

    bool operator==(const RunConfig&) const;
};

/// Every accepted key, with a one-line description. Printed by --help.
inline const std::vector<std::pair<std::string, std::string>>& config_keys() {
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"flow", "flow name (circle|attractor|repeller|vertical|stagnation|gyre|linear|zero) or object"},
        {"flow.kind", "flow name"},
        {"flow.epsilon", "gyre amplitude (default 0.1)"},
        {"flow.omega", "gyre angular frequency (default 2*pi)"},
        {"flow.A", "linear flow matrix [[a11,a12],[a21,a22]]"},
        {"flow.alpha", "flow strength multiplier in [0,1] (default 1)"},
        {"initial", "initial positions: point|circle_formation|gaussian_cloud or object"},
        {"initial.kind", "initial sampler name"},
        {"initial.x0", "point start [x,y] (default [-10,10])"},
        {"initial.radius", "circle formation radius (default 1)"},
        {"initial.center", "gaussian cloud center (default [0,0])"},
        {"initial.s", "gaussian cloud standard deviation (default 1)"},
        {"target", "target density: point|ring|heart or object"},
        {"target.kind", "target name"},
        {"target.center", "target center (point default [10,-10], ring/heart [0,0])"},
        {"target.s", "target width (point 10, ring 1, heart 3)"},
        {"target.r0", "ring radius (default 8)"},
        {"target.l", "heart scale (default 0.15)"},
        {"n_agents", "number of agents N (default 1)"},
        {"sigma", "KDE bandwidth (default 1)"},
        {"lambda_b", "boundary penalty weight (default 10)"},
        {"D", "penalty radius (default 20)"},
        {"T", "horizon (default 1)"},
        {"dt", "sampling step (default 0.001; montecarlo 0.01)"},
        {"grid.bounds", "[xmin,xmax,ymin,ymax] (default [-20,20,-20,20])"},
        {"grid.resolution", "cells per axis (default 500)"},
        {"optimizer.memory", "L-BFGS history pairs (default 10)"},
        {"optimizer.grad_tol", "gradient infinity-norm tolerance (default 1e-6)"},
        {"optimizer.f_rel_tol", "relative objective change tolerance (default 1e-10)"},
        {"optimizer.max_iter", "iteration cap (default 300)"},
        {"optimizer.wolfe_c1", "sufficient decrease constant (default 1e-4)"},
        {"optimizer.wolfe_c2", "curvature constant (default 0.9)"},
        {"optimizer.max_linesearch", "evaluations per line search (default 40)"},
        {"optimizer.gradient", "forward|central finite differences (default forward)"},
        {"integrator.abs_tol", "absolute tolerance (default 1e-9)"},
        {"integrator.rel_tol", "relative tolerance (default 1e-9)"},
        {"homotopy", "ascending alpha schedule ending at 1 (default [0.75,1])"},
        {"table1_continuation", "alpha ramp tried by table1 besides the direct solve (default 0,0.1,...,1)"},
        {"sweep_sizes", "agent counts for sweep (default [1,5,10,25,50])"},
        {"seed", "base seed (default 0)"},
        {"trials", "Monte-Carlo trials M (default 20)"},
        {"threads", "worker threads, 0 = all cores (default 0)"},
        {"output_dir", "output directory (default $WHF_OUTPUT_DIR or whf_output)"},
    };
    return keys;
}

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& prefix) {
    if (!obj.is_object()) throw ConfigError((prefix.empty() ? "config" : prefix) + " must be an object", prefix);
    for (const auto& [k, v] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) {
            const std::string full = prefix.empty() ? k : prefix + "." + k;
            throw ConfigError("unknown config key '" + full + "'", full);
        }
    }
}

inline bool holds_negative(const json& v) {
    if (v.is_number_integer() && !v.is_number_unsigned()) return v.get<long long>() < 0;
    if (v.is_number_float()) return true;
    if (v.is_array())
        for (const auto& e : v)
            if (holds_negative(e)) return true;
    return false;
}

template <class T>
T get(const json& obj, const char* key, const std::string& path) {
    constexpr bool count_like = std::is_unsigned_v<T> || std::is_same_v<T, std::vector<std::size_t>>;
    if constexpr (count_like) {
        if (holds_negative(obj.at(key)))
            throw ConfigError("config key '" + path + "' must be a nonnegative integer", path);
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + path + "' has the wrong type", path);
    }
}

inline std::string join(const std::string& prefix, const char* key) { return prefix.empty() ? key : prefix + "." + key; }

inline Vec2 get_vec2(const json& obj, const char* key, const std::string& path) {
    const auto v = get<std::vector<double>>(obj, key, path);
    if (v.size() != 2) throw ConfigError("config key '" + path + "' must be a 2-vector", path);
    return {v[0], v[1]};
}

template <class T>
void maybe(const json& obj, const char* key, const std::string& prefix, T& out) {
    if (obj.contains(key)) out = get<T>(obj, key, join(prefix, key));
}

inline void maybe_vec2(const json& obj, const char* key, const std::string& prefix, Vec2& out) {
    if (obj.contains(key)) out = get_vec2(obj, key, join(prefix, key));
}

inline FlowSpec parse_flow(const json& j) {
    json obj = j.is_string() ? json{{"kind", j}} : j;
    reject_unknown(obj, {"kind", "epsilon", "omega", "A", "alpha"}, "flow");
    if (!obj.contains("kind")) throw ConfigError("flow requires a kind", "flow.kind");
    const auto name = get<std::string>(obj, "kind", "flow.kind");
    const auto kind = flow_kind_from_string(name);
    if (!kind) throw ConfigError("unknown flow '" + name + "'", "flow.kind");
    FlowSpec f = FlowSpec::of(*kind);
    maybe(obj, "epsilon", "flow", f.epsilon);
    maybe(obj, "omega", "flow", f.omega);
    maybe(obj, "alpha", "flow", f.alpha);
    if (obj.contains("A")) {
        const auto a = get<std::vector<std::vector<double>>>(obj, "A", "flow.A");
        if (a.size() != 2 || a[0].size() != 2 || a[1].size() != 2)
            throw ConfigError("flow.A must be a 2x2 matrix", "flow.A");
        f.A = {a[0][0], a[0][1], a[1][0], a[1][1]};
    } else if (f.kind == FlowKind::Linear) {
        throw ConfigError("linear flow requires A", "flow.A");
    }
    return f;
}

inline InitialSpec parse_initial(const json& j) {
    json obj = j.is_string() ? json{{"kind", j}} : j;
    reject_unknown(obj, {"kind", "x0", "radius", "center", "s"}, "initial");
    const auto kind = obj.contains("kind") ? get<std::string>(obj, "kind", "initial.kind") : std::string("point");
    auto only = [&](std::initializer_list<const char*> keys) { reject_unknown(obj, keys, "initial"); };
    if (kind == "point") {
        only({"kind", "x0"});
        PointInitial p;
        maybe_vec2(obj, "x0", "initial", p.x0);
        return p;
    }
    if (kind == "circle_formation") {
        only({"kind", "radius"});
        CircleFormationInitial c;
        maybe(obj, "radius", "initial", c.radius);
        return c;
    }
    if (kind == "gaussian_cloud") {
        only({"kind", "center", "s"});
        GaussianCloudInitial g;
        maybe_vec2(obj, "center", "initial", g.center);
        maybe(obj, "s", "initial", g.s);
        return g;
    }
    throw ConfigError("unknown initial sampler '" + kind + "'", "initial.kind");
}

inline TargetSpec parse_target(const json& j) {
    json obj = j.is_string() ? json{{"kind", j}} : j;
    reject_unknown(obj, {"kind", "center", "s", "r0", "l"}, "target");
    const auto kind = obj.contains("kind") ? get<std::string>(obj, "kind", "target.kind") : std::string("point");
    auto only = [&](std::initializer_list<const char*> keys) { reject_unknown(obj, keys, "target"); };
    if (kind == "point") {
        only({"kind", "center", "s"});
        PointGaussianTarget t;
        maybe_vec2(obj, "center", "target", t.center);
        maybe(obj, "s", "target", t.s);
        return t;
    }
    if (kind == "ring") {
        only({"kind", "center", "s", "r0"});
        RingTarget t;
        maybe_vec2(obj, "center", "target", t.center);
        maybe(obj, "s", "target", t.s);
        maybe(obj, "r0", "target", t.r0);
        return t;
    }
    if (kind == "heart") {
        only({"kind", "center", "s", "l"});
        HeartTarget t;
        maybe_vec2(obj, "center", "target", t.center);
        maybe(obj, "s", "target", t.s);
        maybe(obj, "l", "target", t.l);
        return t;
    }
    throw ConfigError("unknown target '" + kind + "'", "target.kind");
}

inline json vec2_json(Vec2 v) { return json::array({v.x, v.y}); }

} // namespace detail

/// Parses a config document. Keys that are absent take the defaults for
/// `command`; any key not listed in config_keys() is rejected.
inline RunConfig parse_config(const json& doc, Command command = Command::Plan) {
    using namespace detail;
    reject_unknown(doc,
                   {"flow", "initial", "target", "n_agents", "sigma", "lambda_b", "D", "T", "dt", "grid", "optimizer",
                    "integrator", "homotopy", "table1_continuation", "sweep_sizes", "seed", "trials", "threads",
                    "output_dir"},
                   "");
    RunConfig c;
    if (command == Command::MonteCarlo) c.dt = 0.01;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) c.output_dir = env;

    if (doc.contains("flow")) c.flow = parse_flow(doc.at("flow"));
    if (doc.contains("initial")) c.initial = parse_initial(doc.at("initial"));
    if (doc.contains("target")) c.target = parse_target(doc.at("target"));
    maybe(doc, "n_agents", "", c.n_agents);
    maybe(doc, "sigma", "", c.sigma);
    maybe(doc, "lambda_b", "", c.lambda_b);
    maybe(doc, "D", "", c.D);
    maybe(doc, "T", "", c.T);
    maybe(doc, "dt", "", c.dt);
    if (doc.contains("grid")) {
        const json& g = doc.at("grid");
        reject_unknown(g, {"bounds", "resolution"}, "grid");
        if (g.contains("bounds")) {
            const auto b = get<std::vector<double>>(g, "bounds", "grid.bounds");
            if (b.size() != 4) throw ConfigError("grid.bounds must hold [xmin,xmax,ymin,ymax]", "grid.bounds");
            c.grid.xmin = b[0];
            c.grid.xmax = b[1];
            c.grid.ymin = b[2];
            c.grid.ymax = b[3];
        }
        maybe(g, "resolution", "grid", c.grid.n);
    }
    if (doc.contains("optimizer")) {
        const json& o = doc.at("optimizer");
        reject_unknown(o,
                       {"memory", "grad_tol", "f_rel_tol", "max_iter", "wolfe_c1", "wolfe_c2", "max_linesearch",
                        "gradient"},
                       "optimizer");
        maybe(o, "memory", "optimizer", c.optimizer.memory);
        maybe(o, "grad_tol", "optimizer", c.optimizer.grad_tol);
        maybe(o, "f_rel_tol", "optimizer", c.optimizer.f_rel_tol);
        maybe(o, "max_iter", "optimizer", c.optimizer.max_iter);
        maybe(o, "wolfe_c1", "optimizer", c.optimizer.wolfe_c1);
        maybe(o, "wolfe_c2", "optimizer", c.optimizer.wolfe_c2);
        maybe(o, "max_linesearch", "optimizer", c.optimizer.max_linesearch);
        if (o.contains("gradient")) {
            const auto g = get<std::string>(o, "gradient", "optimizer.gradient");
            if (g == "forward")
                c.gradient = GradientMode::Forward;
            else if (g == "central")
                c.gradient = GradientMode::Central;
            else
                throw ConfigError("optimizer.gradient must be forward or central", "optimizer.gradient");
        }
    }
    if (doc.contains("integrator")) {
        const json& i = doc.at("integrator");
        reject_unknown(i, {"abs_tol", "rel_tol"}, "integrator");
        maybe(i, "abs_tol", "integrator", c.integrator.abs_tol);
        maybe(i, "rel_tol", "integrator", c.integrator.rel_tol);
    }
    maybe(doc, "homotopy", "", c.homotopy);
    maybe(doc, "table1_continuation", "", c.table1_continuation);
    maybe(doc, "sweep_sizes", "", c.sweep_sizes);
    maybe(doc, "seed", "", c.seed);
    maybe(doc, "trials", "", c.trials);
    maybe(doc, "threads", "", c.threads);
    maybe(doc, "output_dir", "", c.output_dir);
    c.validate();
    return c;
}

inline json to_json(const FlowSpec& f) {
    json j{{"kind", std::string(to_string(f.kind))}, {"alpha", f.alpha}};
    if (f.kind == FlowKind::Gyre) {
        j["epsilon"] = f.epsilon;
        j["omega"] = f.omega;
    }
    if (f.kind == FlowKind::Linear) j["A"] = json::array({json::array({f.A.a11, f.A.a12}), json::array({f.A.a21, f.A.a22})});
    return j;
}

inline json to_json(const InitialSpec& spec) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PointInitial>)
                return {{"kind", "point"}, {"x0", detail::vec2_json(s.x0)}};
            else if constexpr (std::is_same_v<T, CircleFormationInitial>)
                return {{"kind", "circle_formation"}, {"radius", s.radius}};
            else
                return {{"kind", "gaussian_cloud"}, {"center", detail::vec2_json(s.center)}, {"s", s.s}};
        },
        spec);
}

inline json to_json(const TargetSpec& spec) {
    return std::visit(
        [](const auto& t) -> json {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, PointGaussianTarget>)
                return {{"kind", "point"}, {"center", detail::vec2_json(t.center)}, {"s", t.s}};
            else if constexpr (std::is_same_v<T, RingTarget>)
                return {{"kind", "ring"}, {"center", detail::vec2_json(t.center)}, {"s", t.s}, {"r0", t.r0}};
            else
                return {{"kind", "heart"}, {"center", detail::vec2_json(t.center)}, {"s", t.s}, {"l", t.l}};
        },
        spec);
}

/// Fully resolved config; parse_config(to_json(c)) == c.
inline json to_json(const RunConfig& c) {
    return json{
        {"flow", to_json(c.flow)},
        {"initial", to_json(c.initial)},
        {"target", to_json(c.target)},
        {"n_agents", c.n_agents},
        {"sigma", c.sigma},
        {"lambda_b", c.lambda_b},
        {"D", c.D},
        {"T", c.T},
        {"dt", c.dt},
        {"grid", {{"bounds", {c.grid.xmin, c.grid.xmax, c.grid.ymin, c.grid.ymax}}, {"resolution", c.grid.n}}},
        {"optimizer",
         {{"memory", c.optimizer.memory},
          {"grad_tol", c.optimizer.grad_tol},
          {"f_rel_tol", c.optimizer.f_rel_tol},
          {"max_iter", c.optimizer.max_iter},
          {"wolfe_c1", c.optimizer.wolfe_c1},
          {"wolfe_c2", c.optimizer.wolfe_c2},
          {"max_linesearch", c.optimizer.max_linesearch},
          {"gradient", c.gradient == GradientMode::Central ? "central" : "forward"}}},
        {"integrator", {{"abs_tol", c.integrator.abs_tol}, {"rel_tol", c.integrator.rel_tol}}},
        {"homotopy", c.homotopy},
        {"table1_continuation", c.table1_continuation},
        {"sweep_sizes", c.sweep_sizes},
        {"seed", c.seed},
        {"trials", c.trials},
        {"threads", c.threads},
        {"output_dir", c.output_dir},
    };
}

inline bool RunConfig::operator==(const RunConfig& o) const { return to_json(*this) == to_json(o); }

inline json load_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string(), "config");
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what(), "config");
    }
}

inline RunConfig parse_config_file(const std::filesystem::path& path, Command command = Command::Plan) {
    return parse_config(load_json_file(path), command);
}

/// Objective context for the config's flow, target and sampled initial positions.
inline ObjectiveContext make_objective_context(const RunConfig& c, std::size_t n_agents) {
    ObjectiveContext ctx = make_context(c.flow, c.target, sample_initial(c.initial, n_agents, c.seed), c.grid);
    ctx.sigma = c.sigma;
    ctx.lambda_b = c.lambda_b;
    ctx.D = c.D;
    ctx.T = c.T;
    ctx.dt = c.dt;
    ctx.gradient_mode = c.gradient;
    ctx.threads = c.threads;
    ctx.integrator = c.integrator;
    ctx.validate();
    return ctx;
}

} // namespace whf::cli
