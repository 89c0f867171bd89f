// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// all pass. Criteria 3-9 run the scenarios in scenarios/acceptance.yaml;
// 1 and 2 add direct oracle checks.
//
//   isojet_acceptance [path/to/acceptance.yaml]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "isojet/builtin_metrics.hpp"
#include "isojet/geodesic.hpp"
#include "isojet/invariants.hpp"
#include "isojet/jets.hpp"
#include "isojet/scenario.hpp"

using namespace isojet;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// compose(f, invert(f)) and compose(invert(f), f) against the identity.
Outcome jet_algebra() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 4;
        const int n = 1 + (trial / 4) % 4;
        const auto layout = JetLayout::get(d, n);
        std::vector<Jet> comps;
        for (int i = 0; i < d; ++i) {
            std::vector<double> c(layout->size(), 0.0);
            for (std::size_t k = layout->degree_begin(1); k < layout->size(); ++k) c[k] = uniform(rng) - 0.5;
            // diagonally dominant linear part keeps the inverse well conditioned
            c[layout->rank(MultiIndex([&] {
                std::vector<int> e(static_cast<std::size_t>(d), 0);
                e[static_cast<std::size_t>(i)] = 1;
                return e;
            }()))] += 2.0;
            comps.push_back(Jet::from_coefficients(d, n, 1, std::move(c)));
        }
        const JetMap f(std::move(comps));
        const JetMap g = invert(f);
        const JetMap id = JetMap::identity(d, n);
        worst = std::max({worst, max_abs_difference(compose(f, g), id), max_abs_difference(compose(g, f), id)});
    }
    std::ostringstream o;
    o << "compose o invert = identity over 100 random jets (d <= 4, N <= 4), max error " << worst;
    return {worst <= 1e-12, o.str()};
}

// h(y) = (exp_p o L)^* g at y, d(exp) from the variational equations.
Mat pulled_back(const ChartMetric& m, const Frame& f, const Vec& y) {
    const auto de = exp_with_differential(m, f.point, f.to_tangent(y));
    const Mat j = de.jacobian * f.basis;
    return j.transpose() * m.value(de.point) * j;
}

// Richardson-extrapolated mixed central difference of h at 0.
Mat fd_second(const ChartMetric& m, const Frame& f, int k, int l, double h) {
    const auto d2 = [&](double s) {
        Vec ek = Vec::Zero(2);
        Vec el = Vec::Zero(2);
        ek(k) = s;
        el(l) = s;
        return ((pulled_back(m, f, ek + el) - pulled_back(m, f, ek - el) - pulled_back(m, f, el - ek) +
                 pulled_back(m, f, -ek - el)) /
                (4 * s * s))
            .eval();
    };
    return (4 * d2(h / 2) - d2(h)) / 3;
}

// Degree-2 S coefficients of the unit sphere against the finite-difference
// pullback and the -(1/3)(delta_ij |x|^2 - x_i x_j) pattern.
double sphere_fd_gap() {
    const auto g = make_sphere_patch(2);
    double worst = 0.0;
    const std::vector<std::pair<Vec, double>> frames = {{Vec::Zero(2), 0.0}, {(Vec(2) << 0.3, -0.2).finished(), 1.1}};
    for (const auto& [p, angle] : frames) {
        Mat rot(2, 2);
        rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
        const Frame f = orthonormal_frame(*g, p, rot);
        const JetMatrix s = s_invariant_matrix(*g, f, 2);
        const std::vector<std::pair<MultiIndex, std::pair<int, int>>> terms = {{{2, 0}, {0, 0}}, {{0, 2}, {1, 1}}, {{1, 1}, {0, 1}}};
        for (const auto& [alpha, kl] : terms) {
            const double weight = kl.first == kl.second ? 0.5 : 1.0;
            const Mat fd = weight * fd_second(*g, f, kl.first, kl.second, 0.04);
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    // coefficient of x^alpha in delta_ij |x|^2 - x_i x_j
                    double pattern = (i == j) ? (alpha[0] == 2 || alpha[1] == 2 ? 1.0 : 0.0) : 0.0;
                    if (i == j ? alpha[i] == 2 : (alpha[0] == 1 && alpha[1] == 1)) pattern -= 1.0;
                    worst = std::max({worst, std::abs(s(i, j).coeff(alpha) - fd(i, j)),
                                      std::abs(fd(i, j) + pattern / 3.0)});
                }
            }
        }
    }
    return worst;
}

std::string value_of(const RunReport& r, const std::string& name) {
    for (const Expectation& e : r.expectations) {
        if (e.name == name) {
            std::ostringstream o;
            o << name << ' ' << e.value;
            return o.str();
        }
    }
    return name + " missing";
}

}  // namespace

int main(int argc, char** argv) {
    const std::string config = argc > 1 ? argv[1] : std::string(ISOJET_SOURCE_DIR) + "/scenarios/acceptance.yaml";
    std::map<std::string, Scenario> scenarios;
    try {
        for (Scenario& s : load_scenarios(config)) scenarios.emplace(s.id, std::move(s));
    } catch (const std::exception& e) {
        std::printf("error: %s\n", e.what());
        return 1;
    }

    std::map<std::string, RunReport> reports;
    // Runs the named scenarios; passes when each ends with the wanted status.
    auto run = [&](const std::vector<std::string>& ids, RunStatus want, std::string& detail) {
        bool ok = true;
        for (const std::string& id : ids) {
            const auto it = scenarios.find(id);
            if (it == scenarios.end()) {
                detail += id + ": not in config; ";
                ok = false;
                continue;
            }
            const RunReport r = run_scenario(it->second);
            ok = ok && r.status == want;
            detail += id + ": " + to_string(r.status);
            if (!r.error.empty()) detail += " (" + r.error + ")";
            for (const Expectation& e : r.expectations) {
                if (!e.pass) detail += " [" + e.name + " failed]";
            }
            detail += "; ";
            reports[id] = r;
        }
        return ok;
    };

    struct Criterion {
        int number;
        std::string title;
        double limit_seconds;
        std::function<Outcome()> body;
    };
    const std::vector<Criterion> criteria = {
        {1, "jet algebra", 1.0, [] { return jet_algebra(); }},
        {2, "normal coordinates", 10.0,
         [&] {
             Outcome o;
             o.pass = run({"flat_normal_coordinates", "poincare_normal_coordinates", "sphere_normal_coordinates",
                           "bump_normal_coordinates"},
                          RunStatus::pass, o.detail);
             const double gap = sphere_fd_gap();
             o.pass = o.pass && gap <= 1e-5;
             std::ostringstream g;
             g << "sphere degree-2 vs finite-difference pullback and -1/3 pattern " << gap;
             o.detail += g.str();
             return o;
         }},
        {3, "atlas isometry check", 30.0,
         [&] {
             Outcome o;
             o.pass = run({"poincare_vs_mobius", "flat_vs_sphere"}, RunStatus::pass, o.detail);
             o.detail += value_of(reports["poincare_vs_mobius"], "overlap");
             return o;
         }},
        {4, "one-jet propagation", 30.0,
         [&] {
             Outcome o;
             o.pass = run({"mobius_propagation"}, RunStatus::pass, o.detail);
             const RunReport& r = reports["mobius_propagation"];
             o.detail += value_of(r, "oracle") + ", " + value_of(r, "loop") + ", " + value_of(r, "pullback");
             return o;
         }},
        {5, "tracker soundness", 120.0,
         [&] {
             Outcome o;
             o.pass = run({"rotated_bumps"}, RunStatus::pass, o.detail);
             const RunReport& r = reports["rotated_bumps"];
             o.pass = o.pass && r.result["record"]["nodes"].size() == 41;
             o.detail += value_of(r, "linear") + ", " + value_of(r, "image_rate");
             return o;
         }},
        {6, "discontinuity demo", 120.0,
         [&] {
             Outcome o;
             o.pass = run({"flip_demo"}, RunStatus::flagged, o.detail);
             const RunReport& r = reports["flip_demo"];
             const int code = exit_code({r});
             o.pass = o.pass && code == 2;
             o.detail += "exit code " + std::to_string(code) + ", flagged " + r.result.value("flagged", nlohmann::json()).dump();
             return o;
         }},
        {7, "rank probe", 60.0,
         [&] {
             Outcome o;
             o.pass = run({"bump_rank", "flat_rank"}, RunStatus::pass, o.detail);
             o.detail += value_of(reports["bump_rank"], "rank_full_by") + ", flat " +
                         value_of(reports["flat_rank"], "rank_deficient") + " of 6";
             return o;
         }},
        {8, "Bergman kernel and metric", 180.0,
         [&] {
             Outcome o;
             o.pass = run({"disc_bergman", "ball_bergman"}, RunStatus::pass, o.detail);
             const RunReport& r = reports["disc_bergman"];
             o.detail += value_of(r, "oracle") + ", " + value_of(r, "mobius") + ", " + value_of(r, "richardson") +
                         ", ball " + value_of(reports["ball_bergman"], "oracle");
             return o;
         }},
        {9, "dilating disc end to end", 300.0,
         [&] {
             Outcome o;
             o.pass = run({"dilating_disc"}, RunStatus::pass, o.detail);
             const RunReport& r = reports["dilating_disc"];
             o.detail += value_of(r, "linear") + ", " + value_of(r, "residual");
             return o;
         }},
    };

    bool all = true;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = o.pass && seconds < c.limit_seconds;
        all = all && pass;
        std::printf("criterion %d %s: %s (%.2f s, limit %.0f s) %s\n", c.number, c.title.c_str(), pass ? "PASS" : "FAIL",
                    seconds, c.limit_seconds, o.detail.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
