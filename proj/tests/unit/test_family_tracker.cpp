#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "isojet/family_tracker.hpp"

using namespace isojet;
using fixtures::rotation;
using fixtures::vec2;

namespace {

MetricPtr moving_bump(double t) {
    return make_conformal_scalar(2, {{vec2(0.2 * t, -0.1), 0.4, 0.5}, {vec2(-0.3, 0.4 + 0.1 * t), -0.2, 0.4}}, 2.0);
}

MetricFamily source_family() { return MetricFamily(-1.0, 1.0, moving_bump, "moving_bump"); }

// g_hat_t = (R(theta(t)))_* g_t, so F_t = R(theta(t)) is an isometry for every t.
MetricFamily rotated_family(std::function<double(double)> theta) {
    return MetricFamily(
        -1.0, 1.0,
        [theta](double t) {
            return make_pushforward(moving_bump(t), make_affine_map(rotation(theta(t)).transpose(), Vec::Zero(2)),
                                    Box::cube(2, 2.0), "rotated");
        },
        "rotated");
}

FrameSection section() { return FrameSection::standard({vec2(0.1, 0.0), vec2(0.25, 0.1), vec2(0.05, 0.2)}); }

OneJet rotation_jet(const Vec& p, double a) { return {p, rotation(a) * p, rotation(a)}; }

std::vector<double> grid(double a, double b, int n) {
    std::vector<double> out;
    for (int k = 0; k < n; ++k) out.push_back(a + (b - a) * k / (n - 1));
    return out;
}

}  // namespace

TEST_CASE("target signature of a constant family does not depend on t") {
    const auto g = MetricFamily::constant(fixtures::bumpy_metric());
    const FrameSection s = section();
    const auto edges = make_atlas(*g.at(0.0), s.at(*g.at(0.0)), 0.3).edges;
    CHECK_FALSE(edges.empty());
    const JetSignature a = target_signature_H(g, s, edges, -0.5, 3);
    const JetSignature b = target_signature_H(g, s, edges, 0.7, 3);
    CHECK(signature_distance(a, b) == 0.0);
}

TEST_CASE("solve_frames recovers transported frames from a perturbed guess") {
    const auto g = source_family();
    const double a = 0.5;
    const auto gh = rotated_family([a](double) { return a; });
    const FrameSection s = section();
    const double t = 0.2;
    const auto source = s.at(*g.at(t));
    const auto edges = make_atlas(*g.at(t), source, 0.3).edges;
    const JetSignature h = target_signature_H(g, s, edges, t, 3);
    std::vector<Frame> guess;
    std::vector<Frame> truth;
    for (const auto& f : source) {
        truth.push_back({rotation(a) * f.point, rotation(a) * f.basis});
        guess.push_back({rotation(a) * f.point + vec2(1e-2, -1e-2), rotation(a + 1e-2) * f.basis});
    }
    TrackerOptions opt;
    opt.degree = 3;
    const FrameFit fit = solve_frames(gh, t, h, guess, opt);
    CHECK(fit.converged);
    CHECK(fit.residual < 1e-8);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        CHECK((fit.frames[i].point - truth[i].point).norm() < 1e-6);
        CHECK((fit.frames[i].basis - truth[i].basis).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("tracking a fixed rotation between families") {
    const auto g = source_family();
    const double a = 0.5;
    const auto gh = rotated_family([a](double) { return a; });
    const FrameSection s = section();
    const TrackRecord rec = track(g, gh, s, rotation_jet(s.points[0], a), 0.0, grid(-0.2, 0.2, 5));
    REQUIRE(rec.nodes.size() == 5);
    CHECK(rec.notes.empty());
    for (const auto& n : rec.nodes) {
        CHECK(n.accepted);
        CHECK(n.flags.empty());
        CHECK((n.jet.linear - rotation(a)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((n.jet.image - rotation(a) * s.points[0]).norm() < 1e-6);
        // a frame change that is constant in t is predicted exactly
        CHECK(n.iterations == 0);
        CHECK(n.residual < 1e-10);
    }
    const SmoothnessReport rep = smoothness_diagnostic(rec);
    CHECK(rep.flagged.empty());
    CHECK(rep.max_linear_rate < 1e-4);

    const std::string csv = to_csv(rec);
    CHECK(csv.substr(0, csv.find('\n')) == "t,q1,q2,D11,D12,D21,D22,residual,flags");
    const auto j = to_json(rec);
    CHECK(j["nodes"].size() == 5);
}

TEST_CASE("a rotating family is tracked with the right rate") {
    const auto g = source_family();
    const auto gh = rotated_family([](double t) { return t; });
    const FrameSection s = FrameSection::standard({vec2(0.1, 0.0), vec2(0.25, 0.1)});
    TrackerOptions opt;
    opt.degree = 2;
    const TrackRecord rec = track(g, gh, s, rotation_jet(s.points[0], 0.0), 0.0, grid(0.0, 0.3, 7), opt);
    REQUIRE(rec.accepted().size() == 7);
    for (const auto* n : rec.accepted()) CHECK((n->jet.linear - rotation(n->t)).cwiseAbs().maxCoeff() < 1e-6);
    const SmoothnessReport rep = smoothness_diagnostic(rec, opt);
    CHECK(rep.flagged.empty());
    for (std::size_t k = 0; k < rep.t.size(); ++k) {
        const double t = rep.t[k];
        // d/dt R(t) row-major, after the two image coordinates
        const Vec& d1 = rep.first[k];
        CHECK(std::abs(d1(2) + std::sin(t)) < 1e-4);
        CHECK(std::abs(d1(3) + std::cos(t)) < 1e-4);
        CHECK(std::abs(d1(4) - std::cos(t)) < 1e-4);
        CHECK(std::abs(d1(5) + std::sin(t)) < 1e-4);
        const Vec dq = vec2(-std::sin(t) * 0.1, std::cos(t) * 0.1);
        CHECK((d1.head(2) - dq).norm() < 1e-4);
    }
}

TEST_CASE("source-side target equals the target-side signature of transported frames") {
    const auto g = source_family();
    const double a = -0.8;
    const auto gh = rotated_family([a](double) { return a; });
    const FrameSection s = section();
    const double t = -0.3;
    const auto source = s.at(*g.at(t));
    const auto edges = make_atlas(*g.at(t), source, 0.3).edges;
    std::vector<Frame> images;
    for (const auto& f : source) images.push_back({rotation(a) * f.point, rotation(a) * f.basis});
    const JetSignature h = target_signature_H(g, s, edges, t, 3);
    const JetSignature hat = signature(*gh.at(t), BallAtlas{images, 0.0, edges}, 3);
    CHECK(signature_distance(h, hat) < 1e-7);
}

TEST_CASE("accepted nodes are consistent isometries and do not depend on the seed node") {
    const auto g = source_family();
    const auto gh = rotated_family([](double t) { return 0.5 * t; });
    const FrameSection s = FrameSection::standard({vec2(0.1, 0.0), vec2(0.25, 0.1)});
    TrackerOptions opt;
    opt.degree = 2;
    const auto nodes = grid(-0.2, 0.2, 5);
    const TrackRecord from_left = track(g, gh, s, rotation_jet(s.points[0], -0.1), -0.2, nodes, opt);
    const TrackRecord from_right = track(g, gh, s, rotation_jet(s.points[0], 0.1), 0.2, nodes, opt);
    REQUIRE(from_left.accepted().size() == 5);
    REQUIRE(from_right.accepted().size() == 5);
    const std::vector<Vec> samples = {vec2(0.1, 0.0), vec2(-0.05, 0.12), vec2(0.0, -0.15)};
    for (std::size_t k = 0; k < 5; ++k) {
        const OneJet& jl = from_left.nodes[k].jet;
        const OneJet& jr = from_right.nodes[k].jet;
        CHECK((jl.image - jr.image).norm() < 1e-8);
        CHECK((jl.linear - jr.linear).cwiseAbs().maxCoeff() < 1e-8);
        const double theta = 0.5 * from_left.nodes[k].t;
        const MetricPtr gt = g.at(from_left.nodes[k].t);
        const MetricPtr ght = gh.at(from_left.nodes[k].t);
        for (const Vec& v : samples) {
            CHECK(efp_residual(*gt, *ght, jl, v, [&](const Vec& x) { return (rotation(theta) * x).eval(); }) < 1e-5);
        }
    }
}

TEST_CASE("non-isometric families are rejected at the seed") {
    const auto flat = MetricFamily::constant(make_euclidean(2));
    const auto sphere = MetricFamily::constant(make_sphere_patch(2));
    const FrameSection s = FrameSection::standard({vec2(0.0, 0.0), vec2(0.2, 0.0)});
    TrackerOptions opt;
    opt.degree = 2;
    opt.max_iterations = 5;
    const TrackRecord rec = track(flat, sphere, s, {vec2(0.0, 0.0), vec2(0.0, 0.0), Mat::Identity(2, 2) * 0.5}, 0.0,
                                  {-0.1, 0.0, 0.1}, opt);
    REQUIRE(rec.nodes.size() == 1);
    CHECK_FALSE(rec.nodes[0].accepted);
    CHECK(rec.nodes[0].flags == std::vector<std::string>{"seed_inconsistent"});
    CHECK_FALSE(rec.notes.empty());
}

TEST_CASE("rank of the signature differential") {
    const auto flat = MetricFamily::constant(make_euclidean(2));
    const FrameSection one = FrameSection::standard({vec2(0.0, 0.0)});
    const RankReport r0 = rank_probe(flat, 0.0, one, {}, 1);
    CHECK(r0.parameter_count == 3);
    CHECK(r0.rank < 3);

    const auto bump = MetricFamily::constant(fixtures::bumpy_metric());
    const FrameSection two = FrameSection::standard({vec2(0.0, 0.0), vec2(0.2, 0.1)});
    const auto edges = make_atlas(*bump.at(0.0), two.at(*bump.at(0.0)), 0.3).edges;
    int last = 0;
    for (int n = 1; n <= 3; ++n) {
        const RankReport r = rank_probe(bump, 0.0, two, edges, n);
        CHECK(r.parameter_count == 6);
        CHECK(r.rank >= last);
        last = r.rank;
    }
    CHECK(last == 6);
}

TEST_CASE("merging records") {
    TrackRecord a;
    TrackRecord b;
    a.nodes.push_back({});
    a.nodes.back().t = 0.5;
    b.nodes.push_back({});
    b.nodes.back().t = -0.5;
    const TrackRecord m = merge_records(a, b);
    REQUIRE(m.nodes.size() == 2);
    CHECK(m.nodes[0].t == -0.5);
    CHECK_THROWS_AS(merge_records(a, a), PreconditionError);
}

TEST_CASE("tracker preconditions") {
    const auto g = MetricFamily::constant(make_euclidean(2));
    const FrameSection s = FrameSection::standard({vec2(0.0, 0.0)});
    const OneJet id{vec2(0.0, 0.0), vec2(0.0, 0.0), Mat::Identity(2, 2)};
    CHECK_THROWS_AS(track(g, g, s, id, 0.05, {0.0, 0.1}), PreconditionError);
    CHECK_THROWS_AS(track(g, g, s, {vec2(1.0, 0.0), vec2(0.0, 0.0), Mat::Identity(2, 2)}, 0.0, {0.0}), PreconditionError);
    CHECK_THROWS_AS(smoothness_diagnostic(TrackRecord{}), PreconditionError);
}
