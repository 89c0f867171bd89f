#pragma once

// Scenario files and batch runs behind the command-line tool.
//
// A config is a YAML document with a list of scenarios:
//
//   schema: 1
//   scenarios:
//     - id: rotation_pullback
//       command: track
//       ...
//
// Every scenario names one command (invariants, check, propagate, track,
// bergman, demo-discontinuity). The whole file is validated before anything
// runs; errors carry file:line:column.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace isojet {

inline constexpr const char* report_schema = "isojet.report/1";

struct ScenarioSpec;

struct Scenario {
    std::string id;
    std::string command;
    std::uint64_t seed = 0;
    /// file:line where the scenario starts
    std::string origin;
    std::shared_ptr<const ScenarioSpec> spec;
};

/// Throws ParseError with file:line:column on malformed input, unknown keys,
/// unresolved registry ids or non-positive tolerances.
std::vector<Scenario> parse_scenarios(const std::string& yaml_text, const std::string& file_name = "<config>");
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);

std::vector<std::string> scenario_commands();

/// A measured quantity compared against a limit from the scenario.
struct Expectation {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    /// "<=", ">=" or "==" (exact, for counts and verdicts)
    std::string relation = "<=";
    bool pass = false;
};

enum class RunStatus { pass, flagged, fail, error };

std::string to_string(RunStatus s);

struct RunReport {
    std::string scenario;
    std::string command;
    std::uint64_t seed = 0;
    RunStatus status = RunStatus::error;
    nlohmann::json result;
    std::vector<Expectation> expectations;
    /// Plot data; empty when the command has none.
    std::string csv;
    std::string error;
    double seconds = 0.0;
};

struct RunOptions {
    /// Overrides the per-scenario seed.
    std::optional<std::uint64_t> seed;
    /// Multiplies every expectation limit and the atlas comparison tolerance.
    double tol_scale = 1.0;
};

/// Never throws for module errors: they become RunStatus::error with a message.
RunReport run_scenario(const Scenario& s, const RunOptions& opt = {});

/// Runs the scenarios in parallel; reports come back in input order.
std::vector<RunReport> run_batch(const std::vector<Scenario>& scenarios, const RunOptions& opt = {});

/// Timing is left out unless asked for, so reports of identical runs are byte-identical.
nlohmann::json to_json(const RunReport& r, bool include_timing = false);

/// Writes <id>.json and, when there is plot data, <id>.csv.
void write_report(const RunReport& r, const std::filesystem::path& dir, bool include_timing = false);

/// 1 if any scenario errored or failed an expectation, else 2 if any was flagged, else 0.
int exit_code(const std::vector<RunReport>& reports);

}  // namespace isojet
