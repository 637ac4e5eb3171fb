#include "whf/cli/run.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

using whf::cli::Command;

namespace {

std::string keys_help() {
    std::ostringstream os;
    os << "\nConfig file keys (JSON object; unknown keys are rejected):\n";
    for (const auto& [key, text] : whf::cli::config_keys()) os << "  " << key << "  " << text << '\n';
    os << "\nEnvironment: " << whf::cli::kOutputDirEnv << " sets the default output_dir.\n"
       << "Exit codes: 0 success, 1 config error, 2 numerical failure, 3 I/O error.\n";
    return os.str();
}

std::vector<double> parse_schedule(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw whf::ConfigError("--alpha-schedule entries must be numbers", "homotopy");
        }
    }
    return out;
}

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_agents;
    std::optional<std::string> flow;
    std::optional<std::string> alpha_schedule;
    std::optional<std::string> out;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> threads;
    bool print_config{false};
};

/// Flag overrides are folded into the JSON document so they pass through the
/// same validation and default resolution as file keys.
whf::cli::RunConfig resolve(Command cmd, const Overrides& o) {
    whf::cli::json doc = o.config_path.empty() ? whf::cli::json::object() : whf::cli::load_json_file(o.config_path);
    if (!doc.is_object()) throw whf::ConfigError("config file must hold a JSON object", "config");
    if (o.seed) doc["seed"] = *o.seed;
    if (o.n_agents) doc["n_agents"] = *o.n_agents;
    if (o.flow) doc["flow"] = *o.flow;
    if (o.alpha_schedule) doc["homotopy"] = parse_schedule(*o.alpha_schedule);
    if (o.out) doc["output_dir"] = *o.out;
    if (o.trials) doc["trials"] = *o.trials;
    if (o.threads) doc["threads"] = *o.threads;
    return whf::cli::parse_config(doc, cmd);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-optimal multi-agent transport in background flows (shooting + L-BFGS)."};
    app.footer(keys_help());
    app.require_subcommand(1);

    Overrides o;
    const std::pair<Command, const char*> commands[] = {
        {Command::Plan, "one optimization from zero controls"},
        {Command::Sweep, "plan for every N in sweep_sizes"},
        {Command::MonteCarlo, "random-start study (defaults: 20 trials, dt 0.01)"},
        {Command::Homotopy, "continuation along the alpha schedule next to the direct run"},
        {Command::Table1, "single-agent benchmark over the six catalog flows"},
        {Command::VerifyLinear, "closed-form linear-flow round-trip checks"},
    };
    std::vector<std::pair<Command, CLI::App*>> subs;
    for (const auto& [cmd, text] : commands) {
        CLI::App* sub = app.add_subcommand(std::string(whf::cli::to_string(cmd)), text);
        sub->add_option("config", o.config_path, "JSON config file (optional)")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "override seed");
        sub->add_option("--n-agents", o.n_agents, "override n_agents");
        sub->add_option("--flow", o.flow, "override flow by name");
        sub->add_option("--alpha-schedule", o.alpha_schedule, "override homotopy, e.g. 0.75,1");
        sub->add_option("--out", o.out, "override output_dir");
        sub->add_option("--trials", o.trials, "override trials");
        sub->add_option("--threads", o.threads, "override threads");
        sub->add_flag("--print-config", o.print_config, "print the resolved config and exit");
        sub->footer(keys_help());
        subs.emplace_back(cmd, sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : whf::cli::kExitConfig;
    }

    Command cmd = Command::Plan;
    for (const auto& [c, sub] : subs)
        if (sub->parsed()) cmd = c;

    whf::cli::RunConfig cfg;
    try {
        cfg = resolve(cmd, o);
    } catch (const whf::ConfigError& e) {
        std::cerr << "config error";
        if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
        std::cerr << ": " << e.what() << '\n';
        return whf::cli::kExitConfig;
    }
    if (o.print_config) {
        std::cout << whf::cli::to_json(cfg).dump(2) << '\n';
        return whf::cli::kExitOk;
    }

    const auto outcome = whf::cli::execute(cmd, cfg);
    const auto& r = outcome.report;
    if (outcome.exit_code != whf::cli::kExitOk) {
        std::cerr << whf::cli::to_string(cmd) << " failed: " << r.value("failure", std::string("unknown error")) << '\n';
    } else {
        std::cout << whf::cli::to_string(cmd) << " finished; report at " << (std::filesystem::path(cfg.output_dir) / "report.json").string()
                  << '\n';
        if (r.contains("E_whf"))
            std::cout << "E_whf " << whf::format_number(r["E_whf"].get<double>()) << "  E_str "
                      << whf::format_number(r["E_str"].get<double>()) << '\n';
    }
    return outcome.exit_code;
}
