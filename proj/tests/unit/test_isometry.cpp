#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "isojet/isometry.hpp"

using namespace isojet;
using fixtures::rotation;
using fixtures::vec2;

namespace {

std::vector<Frame> disc_frames(const ChartMetric& g) {
    return {orthonormal_frame(g, vec2(0.0, 0.0), rotation(0.1)), orthonormal_frame(g, vec2(0.15, 0.1), rotation(0.7)),
            orthonormal_frame(g, vec2(-0.1, 0.2), rotation(-0.3))};
}

}  // namespace

TEST_CASE("an atlas matches itself") {
    const auto g = fixtures::bumpy_metric();
    const BallAtlas a = make_atlas(*g, {standard_frame(*g, vec2(0.0, 0.0)), standard_frame(*g, vec2(0.2, 0.1))}, 0.3);
    const AtlasVerdict v = check_atlas_isometry(*g, *g, a, a, 3, 1e-10);
    CHECK(v.match);
    CHECK(v.witness.gap == 0.0);
}

TEST_CASE("flat and round atlases mismatch at second order") {
    const auto flat = make_euclidean(2);
    const auto sphere = make_sphere_patch(2);
    const BallAtlas a = make_atlas(*flat, {standard_frame(*flat, Vec::Zero(2))}, 0.2);
    const BallAtlas b = make_atlas(*sphere, {standard_frame(*sphere, Vec::Zero(2))}, 0.2);
    const AtlasVerdict v = check_atlas_isometry(*flat, *sphere, a, b, 3, 1e-6);
    CHECK_FALSE(v.match);
    CHECK(v.witness.kind == "s");
    CHECK(v.witness.alpha.order() == 2);
    const auto j = to_json(v);
    CHECK(j["witness"]["alpha"].size() == 2);
}

TEST_CASE("different edge sets are a mismatch") {
    const auto g = make_euclidean(2);
    const BallAtlas a = make_atlas(*g, {standard_frame(*g, Vec::Zero(2)), standard_frame(*g, vec2(0.3, 0.0))}, 0.2);
    const BallAtlas b = make_atlas(*g, {standard_frame(*g, Vec::Zero(2)), standard_frame(*g, vec2(0.5, 0.0))}, 0.2);
    const AtlasVerdict v = check_atlas_isometry(*g, *g, a, b, 2, 1e-6);
    CHECK_FALSE(v.match);
    CHECK(v.reason == "edge sets differ");
}

TEST_CASE("Poincare disc and its Moebius pushforward match and glue") {
    const fixtures::Moebius mob;
    const auto frames = disc_frames(*mob.g);
    std::vector<Frame> images;
    for (const auto& f : frames) images.push_back(mob.transport(f));
    const BallAtlas a = make_atlas(*mob.g, frames, 0.3);
    const BallAtlas b = make_atlas(*mob.pushed, images, 0.3);
    const double tol = 1e-6;
    const AtlasVerdict v = check_atlas_isometry(*mob.g, *mob.pushed, a, b, 3, tol);
    CHECK(v.match);
    const LocalIsometry l = make_local_isometry(mob.g, mob.pushed, a, b);
    CHECK(overlap_discrepancy(l, 30) < 10 * tol);
    // the local maps reproduce the Moebius map
    const Vec x = vec2(0.05, 0.12);
    CHECK((local_map_eval(l, 1, x) - mob.map(x)).norm() < 1e-8);
}

TEST_CASE("local maps send centers to centers and are rigid on flat space") {
    const auto g = make_euclidean(2);
    const Frame a = standard_frame(*g, vec2(0.5, 0.5));
    const Frame b = orthonormal_frame(*g, vec2(-1.0, 2.0), rotation(0.8));
    const BallAtlas sa = make_atlas(*g, {a}, 1.0);
    const BallAtlas sb = make_atlas(*g, {b}, 1.0);
    const LocalIsometry l = make_local_isometry(g, g, sa, sb);
    CHECK((local_map_eval(l, 0, a.point) - b.point).norm() < 1e-15);
    const Vec x = vec2(0.9, 0.2);
    CHECK((local_map_eval(l, 0, x) - (b.point + rotation(0.8) * (x - a.point))).norm() < 1e-13);
    CHECK_THROWS_AS(local_map_eval(l, 0, vec2(3.0, 3.0)), PreconditionError);
}

TEST_CASE("local maps preserve distances") {
    const fixtures::Moebius mob;
    const auto frames = disc_frames(*mob.g);
    std::vector<Frame> images;
    for (const auto& f : frames) images.push_back(mob.transport(f));
    const LocalIsometry l =
        make_local_isometry(mob.g, mob.pushed, make_atlas(*mob.g, frames, 0.3), make_atlas(*mob.pushed, images, 0.3));
    const std::vector<Vec> pts = {vec2(0.02, 0.05), vec2(-0.06, 0.03), vec2(0.05, -0.04)};
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double d0 = distance(*mob.g, pts[i], pts[j]);
            const double d1 = distance(*mob.pushed, local_map_eval(l, 0, pts[i]), local_map_eval(l, 0, pts[j]));
            CHECK(std::abs(d0 - d1) < 1e-7);
        }
    }
}

TEST_CASE("efp residual") {
    const auto g = make_euclidean(2);
    const OneJet id{Vec::Zero(2), Vec::Zero(2), Mat::Identity(2, 2)};
    const auto identity = [](const Vec& x) { return x; };
    CHECK(efp_residual(*g, *g, id, vec2(0.3, -0.4), identity) == 0.0);

    const Mat r = rotation(0.4);
    const OneJet rot{Vec::Zero(2), Vec::Zero(2), r};
    CHECK(efp_residual(*g, *g, rot, vec2(0.3, -0.4), [&](const Vec& x) { return (r * x).eval(); }) < 1e-14);

    // perturbing D moves the residual linearly
    const fixtures::Moebius mob;
    const Vec p = vec2(0.1, 0.05);
    const Vec v = vec2(0.2, 0.1);
    const auto f = [&](const Vec& x) { return mob.map(x); };
    const Mat e = (Mat(2, 2) << 0.3, -0.2, 0.5, 0.1).finished();
    std::vector<double> res;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        OneJet j = mob.one_jet(p);
        j.linear += eps * e;
        res.push_back(efp_residual(*mob.g, *mob.pushed, j, v, f));
    }
    CHECK(res[0] / res[1] == doctest::Approx(10.0).epsilon(0.02));
    CHECK(res[1] / res[2] == doctest::Approx(10.0).epsilon(0.02));
    CHECK(efp_residual(*mob.g, *mob.pushed, mob.one_jet(p), v, f) < 1e-9);
}

TEST_CASE("propagation on flat space keeps the rotation") {
    const auto g = make_euclidean(2);
    const Mat r = rotation(1.2);
    const OneJet j0{Vec::Zero(2), vec2(1.0, 0.0), r};
    const auto chain = propagate_one_jet(*g, *g, j0, {Vec::Zero(2), vec2(0.5, 0.3), vec2(-0.2, 0.7)});
    for (const auto& j : chain) {
        CHECK((j.linear - r).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((j.image - (vec2(1.0, 0.0) + r * j.source)).norm() < 1e-12);
    }
}

TEST_CASE("propagating the Moebius 1-jet reproduces the Moebius map") {
    const fixtures::Moebius mob;
    const OneJet j0 = mob.one_jet(Vec::Zero(2));
    const auto chain = propagate_one_jet(*mob.g, *mob.pushed, j0, {Vec::Zero(2), vec2(0.5, 0.2)});
    for (const auto& j : chain) {
        CHECK((j.image - mob.map(j.source)).norm() < 1e-6);
        CHECK((j.linear - mob.differential(j.source)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(one_jet_defect(*mob.g, *mob.pushed, j) < 1e-6);
    }
}

TEST_CASE("propagation around a loop returns to the seed") {
    const fixtures::Moebius mob;
    const OneJet j0 = mob.one_jet(vec2(0.1, 0.0));
    const auto chain =
        propagate_one_jet(*mob.g, *mob.pushed, j0, {vec2(0.1, 0.0), vec2(0.4, 0.1), vec2(0.2, 0.45), vec2(0.1, 0.0)});
    CHECK((chain.back().image - j0.image).norm() < 1e-6);
    CHECK((chain.back().linear - j0.linear).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("two paths between the same endpoints agree") {
    const fixtures::Moebius mob;
    const OneJet j0 = mob.one_jet(Vec::Zero(2));
    const auto a = propagate_one_jet(*mob.g, *mob.pushed, j0, {Vec::Zero(2), vec2(0.3, -0.2), vec2(0.4, 0.3)}).back();
    const auto b = propagate_one_jet(*mob.g, *mob.pushed, j0, {Vec::Zero(2), vec2(-0.1, 0.35), vec2(0.4, 0.3)}).back();
    CHECK((a.image - b.image).norm() < 1e-6);
    CHECK((a.linear - b.linear).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("evaluate_global") {
    const auto flat = make_euclidean(2);
    const Mat r = rotation(-0.6);
    const OneJet rot{vec2(0.2, 0.1), vec2(0.2, 0.1), r};
    CHECK((evaluate_global(*flat, *flat, rot, vec2(0.2, 0.1)) - vec2(0.2, 0.1)).norm() == 0.0);
    const Vec x = vec2(1.0, -0.5);
    CHECK((evaluate_global(*flat, *flat, rot, x) - (vec2(0.2, 0.1) + r * (x - vec2(0.2, 0.1)))).norm() < 1e-12);

    // g_hat pulled back through the reconstructed map equals g
    const fixtures::Moebius mob;
    const OneJet j0 = mob.one_jet(Vec::Zero(2));
    const double h = 1e-4;
    for (const Vec& p : {vec2(0.3, 0.1), vec2(-0.2, 0.25)}) {
        Mat jac(2, 2);
        for (int k = 0; k < 2; ++k) {
            Vec e = Vec::Zero(2);
            e(k) = h;
            jac.col(k) = (evaluate_global(*mob.g, *mob.pushed, j0, p + e) - evaluate_global(*mob.g, *mob.pushed, j0, p - e)) / (2 * h);
        }
        const Mat pulled = jac.transpose() * mob.pushed->value(evaluate_global(*mob.g, *mob.pushed, j0, p)) * jac;
        CHECK((pulled - mob.g->value(p)).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("propagation rejects a path that does not start at the seed") {
    const auto g = make_euclidean(2);
    const OneJet j0{Vec::Zero(2), Vec::Zero(2), Mat::Identity(2, 2)};
    CHECK_THROWS_AS(propagate_one_jet(*g, *g, j0, {vec2(1.0, 0.0), vec2(2.0, 0.0)}), PreconditionError);
}
