#include <doctest.h>

#include <cmath>
#include <complex>

#include "isojet/builtin_metrics.hpp"
#include "isojet/invariants.hpp"

using namespace isojet;

namespace {

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Mat rotation(double a) {
    Mat r(2, 2);
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return r;
}

MetricPtr bumpy_metric() {
    return make_conformal_scalar(2, {{vec2(0.3, -0.2), 0.4, 0.5}, {vec2(-0.4, 0.5), -0.25, 0.35}}, 2.0);
}

RegionPredicate in_disc() {
    return [](const Vec& x) { return x.squaredNorm() < 1.0; };
}

// h(y) = (exp_p o L)^* g at y, with d(exp) from the variational equations.
Mat pulled_back(const ChartMetric& m, const Frame& f, const Vec& y) {
    const auto de = exp_with_differential(m, f.point, f.to_tangent(y));
    const Mat j = de.jacobian * f.basis;
    return j.transpose() * m.value(de.point) * j;
}

// Richardson-extrapolated central differences of h at 0.
Mat fd_first(const ChartMetric& m, const Frame& f, int k, double h) {
    const auto d1 = [&](double s) {
        Vec e = Vec::Zero(2);
        e(k) = s;
        return ((pulled_back(m, f, e) - pulled_back(m, f, -e)) / (2 * s)).eval();
    };
    return (4 * d1(h / 2) - d1(h)) / 3;
}

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

Mat coefficient(const JetMatrix& s, const MultiIndex& alpha) {
    Mat c(s.rows(), s.cols());
    for (int i = 0; i < s.rows(); ++i) {
        for (int j = 0; j < s.cols(); ++j) c(i, j) = s(i, j).coeff(alpha);
    }
    return c;
}

}  // namespace

TEST_CASE("S on the flat metric is the constant identity") {
    const auto g = make_euclidean(2);
    const Frame f = orthonormal_frame(*g, vec2(0.4, -0.3), rotation(0.7));
    const JetMatrix s = s_invariant_matrix(*g, f, 4);
    CHECK(s.max_abs_difference(JetMatrix::constant(Mat::Identity(2, 2), 2, 4)) < 1e-14);
}

TEST_CASE("S is in normal coordinates: identity value, vanishing first order") {
    const std::vector<std::pair<MetricPtr, Vec>> cases = {
        {make_euclidean(2), vec2(0.2, 0.1)},
        {make_poincare_disc(), vec2(0.2, 0.1)},
        {make_sphere_patch(2), vec2(0.2, 0.1)},
        {bumpy_metric(), vec2(0.2, 0.1)},
    };
    for (const auto& [g, p] : cases) {
        const Frame f = orthonormal_frame(*g, p, rotation(0.3));
        const JetMatrix s = s_invariant_matrix(*g, f, 3);
        CHECK((coefficient(s, {0, 0}) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
        for (int k = 0; k < 2; ++k) {
            const MultiIndex a = k == 0 ? MultiIndex{1, 0} : MultiIndex{0, 1};
            CHECK(coefficient(s, a).cwiseAbs().maxCoeff() < 1e-8);
            // finite-difference pullback along exp rays agrees
            CHECK((fd_first(*g, f, k, 1e-3) - coefficient(s, a)).cwiseAbs().maxCoeff() < 1e-7);
        }
    }
}

TEST_CASE("sphere S has the constant-curvature second-order pattern") {
    const auto g = make_sphere_patch(2);
    const Frame f = orthonormal_frame(*g, vec2(0.3, -0.2), rotation(1.1));
    const JetMatrix s = s_invariant_matrix(*g, f, 3);
    // -(1/3)(delta_ij |x|^2 - x_i x_j)
    const Mat xx = (Mat(2, 2) << 0.0, 0.0, 0.0, -1.0 / 3).finished();
    const Mat yy = (Mat(2, 2) << -1.0 / 3, 0.0, 0.0, 0.0).finished();
    const Mat xy = (Mat(2, 2) << 0.0, 1.0 / 3, 1.0 / 3, 0.0).finished();
    CHECK((coefficient(s, {2, 0}) - xx).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((coefficient(s, {0, 2}) - yy).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((coefficient(s, {1, 1}) - xy).cwiseAbs().maxCoeff() < 1e-5);
    // finite-difference pullback oracle: coefficient of x^2 is half the pure second derivative
    CHECK((0.5 * fd_second(*g, f, 0, 0, 0.04) - coefficient(s, {2, 0})).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((0.5 * fd_second(*g, f, 1, 1, 0.04) - coefficient(s, {0, 2})).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((fd_second(*g, f, 0, 1, 0.04) - coefficient(s, {1, 1})).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("S truncates consistently across degrees") {
    const auto g = bumpy_metric();
    const Frame f = standard_frame(*g, vec2(0.1, 0.0));
    const Jet s4 = s_invariant(*g, f, 4);
    for (int n : {0, 1, 2, 3}) CHECK(max_abs_difference(truncate(s4, n), s_invariant(*g, f, n)) < 1e-10);
}

TEST_CASE("rotating the frame substitutes x -> Qx in S") {
    const auto g = bumpy_metric();
    const Frame f = standard_frame(*g, vec2(0.1, 0.2));
    const Mat q = rotation(0.9);
    const Frame fq{f.point, f.basis * q};
    const JetMatrix s = s_invariant_matrix(*g, f, 2);
    const JetMatrix sq = s_invariant_matrix(*g, fq, 2);
    // S_{beta Q}(x) = Q^T S_beta(Q x) Q
    const JetMap sub = JetMap::affine(Vec::Zero(2), q, 2);
    const MonomialPowers powers(sub, 2);
    const JetMatrix expected = JetMatrix::constant(q.transpose(), 2, 2) * s.apply(powers) * JetMatrix::constant(q, 2, 2);
    CHECK(sq.max_abs_difference(expected) < 1e-10);
}

TEST_CASE("T on the flat metric is a translation") {
    const auto g = make_euclidean(2);
    const Frame a = standard_frame(*g, vec2(0.0, 0.0));
    const Frame b = standard_frame(*g, vec2(1.0, 0.0));
    const JetMap t = t_invariant(*g, a, b, 3);
    const JetMap expected = JetMap::affine(vec2(1.0, 0.0), Mat::Identity(2, 2), 3);
    CHECK(max_abs_difference(t, expected) < 1e-12);
    CHECK(max_abs_difference(t_invariant(*g, a, a, 3), JetMap::identity(2, 3)) < 1e-14);
}

TEST_CASE("T of a frame with itself is the identity") {
    const auto g = bumpy_metric();
    const Frame a = orthonormal_frame(*g, vec2(0.2, -0.1), rotation(0.4));
    CHECK(max_abs_difference(t_invariant(*g, a, a, 3), JetMap::identity(2, 3)) < 1e-10);
}

TEST_CASE("Poincare T is an isometry between normal charts") {
    const auto g = make_poincare_disc();
    const Frame a = standard_frame(*g, vec2(0.0, 0.0));
    const Frame b = standard_frame(*g, vec2(0.3, 0.0));
    const JetMap t = t_invariant(*g, a, b, 3);
    // the metric Gram matrix of a's normal chart at T(0), pulled back through dT, is the identity
    const Mat lin = t.linear_part();
    const Mat gram = pulled_back(*g, a, t.constant_term());
    CHECK((lin.transpose() * gram * lin - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
    // T(0) is b's base point in a's normal coordinates: |T(0)| = hyperbolic distance
    CHECK(t.constant_term().norm() == doctest::Approx(2 * std::atanh(0.3)).epsilon(1e-10));
}

TEST_CASE("signature of a single flat frame") {
    const auto g = make_euclidean(2);
    const BallAtlas atlas = make_atlas(*g, {standard_frame(*g, Vec::Zero(2))}, 0.5);
    const JetSignature sig = signature(*g, atlas, 3);
    CHECK(sig.s_jets.size() == 1);
    CHECK(sig.t_jets.empty());
    CHECK((unpack_symmetric(sig.s_jets[0], 2).constant_term() - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

namespace {

struct MoebiusSetup {
    MetricPtr g = make_poincare_disc();
    MobiusCoefficients f = MobiusCoefficients::disc_automorphism(0.6, {0.25, -0.1});
    MetricPtr pushed = make_pushforward(g, make_mobius_map(f.inverse()), Box::cube(2, 1.0), "pushed", in_disc());

    // frame (p, B) -> (f(p), f'(p) B)
    Frame transport(const Frame& b) const {
        const std::complex<double> z(b.point(0), b.point(1));
        const auto w = f(z);
        const auto df = f.derivative(z);
        const Mat j = (Mat(2, 2) << df.real(), -df.imag(), df.imag(), df.real()).finished();
        return {vec2(w.real(), w.imag()), j * b.basis};
    }
};

}  // namespace

TEST_CASE("invariants are unchanged by an isometry") {
    const MoebiusSetup s;
    const Frame a = orthonormal_frame(*s.g, vec2(0.1, 0.2), rotation(0.2));
    const Frame b = orthonormal_frame(*s.g, vec2(-0.2, 0.05), rotation(-0.5));
    const Frame fa = s.transport(a);
    const Frame fb = s.transport(b);
    CHECK(orthonormality_error(*s.pushed, fa) < 1e-12);
    CHECK(max_abs_difference(s_invariant(*s.g, a, 3), s_invariant(*s.pushed, fa, 3)) < 1e-7);
    CHECK(max_abs_difference(t_invariant(*s.g, a, b, 3), t_invariant(*s.pushed, fa, fb, 3)) < 1e-7);
}

TEST_CASE("signatures of Moebius-related atlases agree") {
    const MoebiusSetup s;
    std::vector<Frame> frames = {orthonormal_frame(*s.g, vec2(0.0, 0.0), rotation(0.1)),
                                 orthonormal_frame(*s.g, vec2(0.15, 0.1), rotation(0.7)),
                                 orthonormal_frame(*s.g, vec2(-0.1, 0.2), rotation(-0.3))};
    std::vector<Frame> images;
    for (const auto& f : frames) images.push_back(s.transport(f));
    const BallAtlas a = make_atlas(*s.g, frames, 0.3);
    const BallAtlas b = make_atlas(*s.pushed, images, 0.3);
    CHECK(a.edges == b.edges);
    CHECK(a.edges.size() == 3);
    const JetSignature sa = signature(*s.g, a, 3);
    const JetSignature sb = signature(*s.pushed, b, 3);
    CHECK(signature_distance(sa, sb) < 1e-7);
    CHECK(flatten(sa).size() == flatten(sb).size());
}

TEST_CASE("permuting the frames permutes the signature") {
    const auto g = bumpy_metric();
    const std::vector<Frame> frames = {standard_frame(*g, vec2(0.0, 0.0)), standard_frame(*g, vec2(0.2, 0.1)),
                                       standard_frame(*g, vec2(-0.1, 0.25))};
    // cyclic shift keeps the orientation of edge (0, 1) -> (1, 2)
    const std::vector<Frame> shifted = {frames[2], frames[0], frames[1]};
    const JetSignature a = signature(*g, make_atlas(*g, frames, 0.5), 2);
    const JetSignature b = signature(*g, make_atlas(*g, shifted, 0.5), 2);
    for (int i = 0; i < 3; ++i) CHECK(max_abs_difference(a.s_jets[static_cast<std::size_t>(i)], b.s_jets[static_cast<std::size_t>((i + 1) % 3)]) == 0.0);
    const auto find = [](const JetSignature& sig, Edge e) {
        for (std::size_t k = 0; k < sig.edges.size(); ++k) {
            if (sig.edges[k] == e) return k;
        }
        FAIL("edge missing");
        return std::size_t{0};
    };
    CHECK(max_abs_difference(a.t_jets[find(a, {0, 1})], b.t_jets[find(b, {1, 2})]) == 0.0);
}

TEST_CASE("worst gap names the violating coefficient") {
    const auto flat = make_euclidean(2);
    const auto sphere = make_sphere_patch(2);
    const BallAtlas a = make_atlas(*flat, {standard_frame(*flat, Vec::Zero(2))}, 0.2);
    const BallAtlas b = make_atlas(*sphere, {standard_frame(*sphere, Vec::Zero(2))}, 0.2);
    const SignatureGap gap = worst_gap(signature(*flat, a, 2), signature(*sphere, b, 2));
    CHECK(gap.kind == "s");
    CHECK(gap.alpha.order() == 2);
    CHECK(gap.gap == doctest::Approx(1.0 / 3).epsilon(1e-6));
}

TEST_CASE("signature JSON lists s-jets then labelled t-jets") {
    const auto g = make_euclidean(2);
    const BallAtlas atlas = make_atlas(*g, {standard_frame(*g, Vec::Zero(2)), standard_frame(*g, vec2(0.3, 0.0))}, 0.5);
    const auto j = to_json(signature(*g, atlas, 1));
    CHECK(j["s_jets"].size() == 2);
    CHECK(j["t_jets"].size() == 1);
    CHECK(j["t_jets"][0]["edge"] == nlohmann::json::array({0, 1}));
}

TEST_CASE("invariant preconditions") {
    const auto g = make_sphere_patch(2);
    const Frame bad{Vec::Zero(2), Mat::Identity(2, 2)};  // g(0) = 4 I
    CHECK_THROWS_AS(s_invariant(*g, bad, 2), PreconditionError);
    CHECK_THROWS_AS(s_invariant(*g, standard_frame(*g, Vec::Zero(2)), 9), PreconditionError);
    const auto flat = make_euclidean(2, 1.0);
    BallAtlas atlas = make_atlas(*flat, {standard_frame(*flat, Vec::Zero(2))}, 0.5);
    InjectivityOptions inj;
    inj.directions = 32;
    inj.radii = 4;
    validate_atlas(*flat, atlas, inj);
    atlas.delta = 2.0;  // balls leave the chart box
    CHECK_THROWS_AS(validate_atlas(*flat, atlas, inj), PreconditionError);
}
