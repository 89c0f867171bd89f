#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "isojet/error.hpp"
#include "isojet/scenario.hpp"

using namespace isojet;
using nlohmann::json;

namespace {

const std::filesystem::path source_dir = ISOJET_SOURCE_DIR;

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// Structure and strings must agree exactly; numbers up to round-off noise.
void compare_json(const json& got, const json& want, const std::string& path) {
    INFO("at " << path);
    if (want.is_number() && got.is_number()) {
        const double a = got.get<double>();
        const double b = want.get<double>();
        CHECK(std::abs(a - b) <= 1e-9 + 1e-6 * std::abs(b));
        return;
    }
    REQUIRE(got.type() == want.type());
    if (want.is_object()) {
        REQUIRE(got.size() == want.size());
        for (const auto& [k, v] : want.items()) {
            REQUIRE(got.contains(k));
            compare_json(got[k], v, path + "." + k);
        }
    } else if (want.is_array()) {
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) compare_json(got[i], want[i], path + "[" + std::to_string(i) + "]");
    } else {
        CHECK(got == want);
    }
}

std::string parse_error(const std::string& yaml) {
    try {
        (void)parse_scenarios(yaml, "cfg.yaml");
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

const char* invariants_yaml = R"(schema: 1
scenarios:
  - id: flat
    command: invariants
    seed: 3
    metric: {id: euclidean}
    random_frames: 3
    degree: 2
    expect: {normal_coordinates: 1.0e-12}
)";

}  // namespace

TEST_CASE("golden scenarios reproduce their stored reports") {
    const auto scenarios = load_scenarios(source_dir / "scenarios" / "golden.yaml");
    REQUIRE(scenarios.size() == scenario_commands().size());
    std::set<std::string> commands;
    for (const Scenario& s : scenarios) {
        commands.insert(s.command);
        const RunReport r = run_scenario(s);
        INFO(s.id << ": " << r.error);
        CHECK(r.status == (s.command == "demo-discontinuity" ? RunStatus::flagged : RunStatus::pass));
        const auto golden = source_dir / "tests" / "golden" / (s.id + ".json");
        REQUIRE(std::filesystem::exists(golden));
        compare_json(to_json(r), json::parse(read_file(golden)), s.id);
    }
    CHECK(commands.size() == scenario_commands().size());
}

TEST_CASE("identical config and seed give byte-identical reports") {
    const auto s = parse_scenarios(invariants_yaml);
    const std::string a = to_json(run_scenario(s[0])).dump();
    const std::string b = to_json(run_scenario(s[0])).dump();
    CHECK(a == b);
    RunOptions other;
    other.seed = 4;
    const RunReport c = run_scenario(s[0], other);
    CHECK(c.seed == 4);
    CHECK(to_json(c).dump() != a);
    CHECK_FALSE(to_json(c).contains("seconds"));
    CHECK(to_json(c, true).contains("seconds"));
}

TEST_CASE("batch runs keep input order and match single runs") {
    const auto s = load_scenarios(source_dir / "scenarios" / "golden.yaml");
    const std::vector<Scenario> pick = {s[0], s[4]};
    const auto reports = run_batch(pick);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].scenario == s[0].id);
    CHECK(reports[1].scenario == s[4].id);
    CHECK(to_json(reports[1]).dump() == to_json(run_scenario(s[4])).dump());
}

TEST_CASE("tolerance scale multiplies the limits") {
    const auto s = parse_scenarios(invariants_yaml);
    RunOptions tight;
    tight.tol_scale = 1e-30;
    const RunReport r = run_scenario(s[0], tight);
    REQUIRE(r.expectations.size() == 1);
    CHECK(r.expectations[0].limit == doctest::Approx(1e-42));
    // the flat metric is exact, so even this limit may hold; a huge scale always does
    RunOptions loose;
    loose.tol_scale = 1e6;
    CHECK(run_scenario(s[0], loose).status == RunStatus::pass);
}

TEST_CASE("parse errors carry file, line and column") {
    CHECK(parse_error("schema: 1\nscenarios:\n  - id: a\n    command: nope\n").find("cfg.yaml:4:14") != std::string::npos);
    const std::string unknown = parse_error(
        "scenarios:\n  - id: a\n    command: invariants\n    metric: {id: euclidean}\n    points: [[0, 0]]\n    colour: red\n");
    CHECK(unknown.find("cfg.yaml:6:5") != std::string::npos);
    CHECK(unknown.find("unknown key 'colour'") != std::string::npos);
    CHECK(parse_error("scenarios:\n  - id: a\n    command: invariants\n    metric: {id: klein}\n    points: [[0, 0]]\n")
              .find("unknown metric id 'klein'") != std::string::npos);
    CHECK(parse_error("scenarios: [\n").find("cfg.yaml:") == 0);
    CHECK(parse_error("").find("empty config") != std::string::npos);
    CHECK(parse_error("schema: 2\nscenarios: []\n").find("unsupported schema") != std::string::npos);
}

TEST_CASE("parse rejects bad values before anything runs") {
    const std::string head = "scenarios:\n  - id: a\n";
    // non-positive tolerance
    CHECK(parse_error(head + "    command: check\n    metric: {id: poincare_disc}\n    target: {metric: {id: poincare_disc}}\n"
                             "    points: [[0, 0]]\n    tol: -1\n")
              .find("'tol' must be positive") != std::string::npos);
    // wrong point dimension
    CHECK(parse_error(head + "    command: invariants\n    metric: {id: euclidean}\n    points: [[0, 0, 0]]\n")
              .find("2 coordinates") != std::string::npos);
    // duplicate ids
    CHECK(parse_error("scenarios:\n  - {id: a, command: invariants, metric: {id: euclidean}, points: [[0, 0]]}\n"
                      "  - {id: a, command: invariants, metric: {id: euclidean}, points: [[0, 0]]}\n")
              .find("duplicate scenario id") != std::string::npos);
    // bad metric parameter surfaces the registry's message
    CHECK(parse_error(head + "    command: invariants\n    metric: {id: sphere_patch, params: {radius: -1}}\n    points: [[0, 0]]\n")
              .find("radius must be positive") != std::string::npos);
    // t0 off the grid
    CHECK(parse_error(head + "    command: track\n    source: {family: constant, metric: {id: euclidean}}\n"
                             "    target: {transform: {rotation: 0.1}}\n    points: [[0, 0]]\n"
                             "    grid: {from: 0, to: 1, count: 3}\n    t0: 0.3\n")
              .find("t0 must be a grid node") != std::string::npos);
    // positivity of the flip family
    CHECK(parse_error(head + "    command: demo-discontinuity\n    flip: {amplitude: 5}\n    points: [[0.1, 0]]\n")
              .find("amplitude too large") != std::string::npos);
    // non-pseudoconvex domain
    CHECK(parse_error(head + "    command: bergman\n    domain: {id: expression, expression: \"|z|^2 - 1 - 2*re(z)^2\"}\n")
              .size() > 0);
}

TEST_CASE("module errors become error reports") {
    // base point outside the disc
    const auto s = parse_scenarios(
        "scenarios:\n  - id: out\n    command: check\n    metric: {id: poincare_disc}\n"
        "    target: {metric: {id: poincare_disc}}\n    points: [[1.5, 0]]\n");
    const RunReport r = run_scenario(s[0]);
    CHECK(r.status == RunStatus::error);
    CHECK_FALSE(r.error.empty());
    CHECK(to_json(r)["status"] == "error");
    CHECK(exit_code({r}) == 1);
}

TEST_CASE("check reports a mismatch for flat against sphere") {
    const auto s = parse_scenarios(
        "scenarios:\n  - id: m\n    command: check\n    metric: {id: euclidean}\n"
        "    target: {metric: {id: sphere_patch}}\n    points: [[0, 0], [0.2, 0.1]]\n    overlap_samples: 0\n"
        "    expect: {verdict: mismatch}\n");
    const RunReport r = run_scenario(s[0]);
    CHECK(r.status == RunStatus::pass);
    CHECK(r.result["verdict"]["match"] == false);
}

TEST_CASE("exit codes: error or failure beats flagged beats pass") {
    RunReport pass;
    pass.status = RunStatus::pass;
    RunReport flagged;
    flagged.status = RunStatus::flagged;
    RunReport fail;
    fail.status = RunStatus::fail;
    CHECK(exit_code({pass}) == 0);
    CHECK(exit_code({pass, flagged}) == 2);
    CHECK(exit_code({flagged, fail}) == 1);
    CHECK(exit_code({}) == 0);
}

TEST_CASE("reports are written as json and csv") {
    const auto dir = std::filesystem::temp_directory_path() / "isojet_test_reports";
    std::filesystem::remove_all(dir);
    const auto s = parse_scenarios(invariants_yaml);
    const RunReport r = run_scenario(s[0]);
    write_report(r, dir);
    const json j = json::parse(read_file(dir / "flat.json"));
    CHECK(j["schema"] == report_schema);
    CHECK(j["status"] == "pass");
    CHECK(read_file(dir / "flat.csv").rfind("kind,index,component,alpha,value\n", 0) == 0);
    std::filesystem::remove_all(dir);
}
