#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "isojet/error.hpp"
#include "isojet/family_tracker.hpp"
#include "isojet/flip_family.hpp"

using namespace isojet;
using fixtures::vec2;

TEST_CASE("profile vanishes to third order at zero") {
    CHECK(flip_profile(0.0, 1.0) == 0.0);
    CHECK(flip_profile(0.3, 1.0) == doctest::Approx(std::exp(-1.0 / 0.3)));
    CHECK(flip_profile(-0.3, 1.0) == flip_profile(0.3, 1.0));
    // central differences at 0: p', p'', p''' all shrink to nothing
    for (double h : {0.02, 0.01}) {
        const double p1 = flip_profile(h, 1.0);
        const double p2 = flip_profile(2 * h, 1.0);
        const double d1 = (p1 - flip_profile(-h, 1.0)) / (2 * h);
        const double d2 = (p1 - 2 * flip_profile(0.0, 1.0) + flip_profile(-h, 1.0)) / (h * h);
        const double d3 = (p2 - 2 * p1 + 2 * flip_profile(-h, 1.0) - flip_profile(-2 * h, 1.0)) / (2 * h * h * h);
        CHECK(std::abs(d1) < 1e-12);
        CHECK(std::abs(d2) < 1e-12);
        CHECK(std::abs(d3) < 1e-12);
        // one-sided remainder p(h) / h^3 also vanishes
        CHECK(p1 / (h * h * h) < 1e-12);
    }
}

TEST_CASE("metric t-derivatives vanish at zero") {
    const FlipFamily fam = build_flip_family();
    const Vec x = vec2(0.25, 0.15);
    const Mat g0 = fam.source.at(0.0)->value(x);
    CHECK((g0 - Mat::Identity(2, 2)).norm() == 0.0);
    const double h = 0.005;
    const Mat gp = fam.source.at(h)->value(x);
    const Mat gm = fam.target.at(-h)->value(x);
    CHECK((gp - g0).norm() / h < 1e-6);
    CHECK((gm - g0).norm() / (h * h) < 1e-4);
}

TEST_CASE("target is the source for t > 0 and its reflection for t < 0") {
    const FlipFamily fam = build_flip_family();
    const Mat& r = fam.reflection;
    for (const Vec& x : {vec2(0.3, 0.2), vec2(-0.1, 0.4), vec2(0.05, -0.25)}) {
        CHECK((fam.target.at(0.6)->value(x) - fam.source.at(0.6)->value(x)).norm() == 0.0);
        const Mat pushed = r * fam.source.at(-0.6)->value(r * x) * r;
        CHECK((fam.target.at(-0.6)->value(x) - pushed).norm() < 1e-15);
        // the bumps break the reflection symmetry of the source itself
        CHECK((fam.source.at(-0.6)->value(x) - pushed).norm() > 1e-3);
    }
}

TEST_CASE("positivity bound") {
    FlipOptions opt;
    opt.amplitude = 2.0;
    CHECK_THROWS_AS(build_flip_family(opt), PreconditionError);
    opt.amplitude = 0.4;
    opt.profile_scale = 0.0;
    CHECK_THROWS_AS(build_flip_family(opt), PreconditionError);
    // just inside the bound every sampled metric is positive definite
    opt = FlipOptions{};
    double bound = 0.0;
    for (const FlipBump& b : default_flip_bumps()) bound += std::abs(b.weight) * b.shape.jacobiSvd().singularValues()(0);
    opt.amplitude = 0.99 / bound;
    const FlipFamily fam = build_flip_family(opt);
    for (double t : {-1.0, -0.3, 0.5, 1.0}) {
        for (double a = -1.0; a <= 1.0; a += 0.25) {
            for (double b = -1.0; b <= 1.0; b += 0.25) {
                const Eigen::SelfAdjointEigenSolver<Mat> es(fam.target.at(t)->value(vec2(a, b)));
                CHECK(es.eigenvalues().minCoeff() > 0.0);
            }
        }
    }
}

TEST_CASE("amplitude 0 gives identical families and a smooth track") {
    FlipOptions opt;
    opt.amplitude = 0.0;
    const FlipFamily fam = build_flip_family(opt);
    const Vec x = vec2(0.2, -0.1);
    for (double t : {-0.5, 0.0, 0.5}) CHECK((fam.source.at(t)->value(x) - fam.target.at(t)->value(x)).norm() == 0.0);
    std::vector<double> grid;
    for (int k = 0; k < 9; ++k) grid.push_back(-0.4 + 0.1 * k);
    const auto gamma = FrameSection::standard({vec2(0.1, 0.0), vec2(0.25, 0.1), vec2(0.05, 0.2)});
    const Vec p = gamma.points[0];
    const TrackRecord rec = track(fam.source, fam.target, gamma, OneJet{p, p, Mat::Identity(2, 2)}, 0.0, grid);
    CHECK(rec.accepted().size() == grid.size());
    CHECK(smoothness_diagnostic(rec).flagged.empty());
}
