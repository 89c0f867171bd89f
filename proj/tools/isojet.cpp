// isojet: runs the scenarios of a YAML config for one subcommand.
//
//   isojet track --config scenarios/golden.yaml --out-dir out
//
// Exit status: 0 when every selected scenario passes, 2 when one is flagged
// by a diagnostic, 1 on any error or failed expectation.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "isojet/error.hpp"
#include "isojet/scenario.hpp"

namespace {

struct Args {
    std::string config;
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "isojet-out";
    double tol_scale = 1.0;
    bool timing = false;
};

void add_common(CLI::App* sub, Args& a) {
    sub->add_option("--config", a.config, "YAML scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--scenario", a.scenario, "run only the scenario with this id");
    sub->add_option("--seed", a.seed, "override every scenario's seed");
    sub->add_option("--out-dir", a.out_dir, "directory for <id>.json and <id>.csv");
    sub->add_option("--tol-scale", a.tol_scale, "multiply every tolerance")->check(CLI::PositiveNumber);
    sub->add_flag("--timing", a.timing, "include wall time in the reports");
}

int run(const std::string& command, const Args& a) {
    std::vector<isojet::Scenario> all;
    try {
        all = isojet::load_scenarios(a.config);
    } catch (const isojet::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::vector<isojet::Scenario> selected;
    for (const auto& s : all) {
        if (!a.scenario.empty() && s.id != a.scenario) continue;
        if (s.command != command) {
            if (!a.scenario.empty()) {
                std::cerr << "error: " << s.origin << ": scenario '" << s.id << "' is a '" << s.command
                          << "' scenario, not '" << command << "'\n";
                return 1;
            }
            continue;
        }
        selected.push_back(s);
    }
    if (selected.empty()) {
        std::cerr << "error: " << a.config << ": no '" << command << "' scenario"
                  << (a.scenario.empty() ? "" : " with id '" + a.scenario + "'") << '\n';
        return 1;
    }

    isojet::RunOptions opt;
    opt.seed = a.seed;
    opt.tol_scale = a.tol_scale;
    const auto reports = isojet::run_batch(selected, opt);
    for (const auto& r : reports) {
        try {
            isojet::write_report(r, a.out_dir, a.timing);
        } catch (const isojet::Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
        std::cout << r.scenario << ": " << isojet::to_string(r.status);
        for (const auto& e : r.expectations) {
            if (!e.pass) std::cout << " [" << e.name << " = " << e.value << ", want " << e.relation << ' ' << e.limit << ']';
        }
        if (!r.error.empty()) std::cout << " (" << r.error << ')';
        std::cout << '\n';
    }
    return isojet::exit_code(reports);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Isometry detection by jet invariants"};
    app.require_subcommand(1);
    Args args;
    std::string command;
    for (const std::string& c : isojet::scenario_commands()) {
        CLI::App* sub = app.add_subcommand(c, "run the '" + c + "' scenarios of a config");
        add_common(sub, args);
        sub->callback([&command, c] { command = c; });
    }
    CLI::App* list = app.add_subcommand("list", "print the scenarios of a config");
    std::string list_config;
    list->add_option("--config", list_config, "YAML scenario file")->required()->check(CLI::ExistingFile);
    list->callback([&command] { command = "list"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (command == "list") {
        try {
            for (const auto& s : isojet::load_scenarios(list_config)) std::cout << s.id << '\t' << s.command << '\t' << s.origin << '\n';
        } catch (const isojet::Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
        return 0;
    }
    return run(command, args);
}
