#include "doctest.h"

#include <cmath>
#include <random>

#include "isojet/error.hpp"
#include "isojet/jets.hpp"
#include "isojet/jets_json.hpp"

using namespace isojet;

namespace {

Jet random_jet(std::mt19937& rng, int d, int n, double constant = 0.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Jet j(d, n);
    for (double& c : j.coefficients()) c = u(rng);
    j.coeff(0) = constant;
    return j;
}

JetMap random_map(std::mt19937& rng, int d, int n, bool zero_constant = true) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Jet> c;
    for (int i = 0; i < d; ++i) c.push_back(random_jet(rng, d, n, zero_constant ? 0.0 : u(rng)));
    return JetMap(std::move(c));
}

Jet poly1(std::initializer_list<double> coeffs, int degree) {
    Jet j(1, degree);
    std::size_t k = 0;
    for (double c : coeffs) j.coeff(k++) = c;
    return j;
}

}  // namespace

TEST_CASE("graded-lex layout") {
    auto lay = JetLayout::get(2, 2);
    REQUIRE(lay->size() == 6);
    CHECK(lay->index(0) == MultiIndex{0, 0});
    CHECK(lay->index(1) == MultiIndex{1, 0});
    CHECK(lay->index(2) == MultiIndex{0, 1});
    CHECK(lay->index(3) == MultiIndex{2, 0});
    CHECK(lay->index(4) == MultiIndex{1, 1});
    CHECK(lay->index(5) == MultiIndex{0, 2});
    for (std::size_t r = 0; r + 1 < lay->size(); ++r) CHECK(lay->index(r) < lay->index(r + 1));
    CHECK(lay->rank(MultiIndex{1, 1}) == 4);
    CHECK(MultiIndex{2, 1, 0}.order() == 3);
    CHECK(JetLayout::get(3, 4)->size() == 35);
    CHECK_THROWS_AS(lay->rank(MultiIndex{2, 1}), DimensionError);
}

TEST_CASE("jet_arith examples") {
    SUBCASE("(1+x)(1-x) = 1 - x^2") {
        Jet p = jet_arith(poly1({1, 1}, 2), poly1({1, -1}, 2), JetOp::mul);
        CHECK(p.coeff(0) == 1.0);
        CHECK(p.coeff(1) == 0.0);
        CHECK(p.coeff(2) == -1.0);
    }
    SUBCASE("additive identity") {
        std::mt19937 rng(1);
        Jet a = random_jet(rng, 3, 3, 0.4);
        CHECK(max_abs_difference(jet_arith(a, Jet(3, 3), JetOp::add), a) == 0.0);
    }
    SUBCASE("degree cap") {
        Jet x2 = poly1({0, 0, 1}, 3);
        Jet p = jet_arith(x2, x2, JetOp::mul);
        for (double c : p.coefficients()) CHECK(c == 0.0);
    }
    SUBCASE("scale") {
        Jet p = jet_arith(poly1({1, 2}, 1), Jet(1, 1), JetOp::scale, 3.0);
        CHECK(p.coeff(1) == 6.0);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(jet_arith(Jet(2, 2), Jet(2, 3), JetOp::add), DimensionError);
        CHECK_THROWS_AS(jet_arith(Jet(2, 2), Jet(3, 2), JetOp::mul), DimensionError);
        CHECK_THROWS_AS(jet_arith(Jet(2, 2, 2), Jet(2, 2), JetOp::mul), DimensionError);
    }
}

TEST_CASE("ring laws on random jets") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 1 + trial % 4;
        const int n = 1 + trial % 5;
        Jet a = random_jet(rng, d, n, 0.3);
        Jet b = random_jet(rng, d, n, -0.7);
        Jet c = random_jet(rng, d, n, 1.1);
        CHECK(max_abs_difference(a * b, b * a) <= 1e-13);
        CHECK(max_abs_difference((a * b) * c, a * (b * c)) <= 1e-13);
        CHECK(max_abs_difference(a * (b + c), a * b + a * c) <= 1e-13);
    }
}

TEST_CASE("vector-valued times scalar jet") {
    Jet x = Jet::variable(1, 2, 0);
    Jet v = Jet::stack(std::vector<Jet>{Jet::constant(1, 2, 1.0), x});
    Jet p = x * v;
    CHECK(p.value_dim() == 2);
    CHECK(p.coeff(1, 0) == 1.0);
    CHECK(p.coeff(2, 1) == 1.0);
}

TEST_CASE("jet_truncate") {
    Jet f = poly1({1, 1, 1}, 2);
    Jet t1 = truncate(f, 1);
    CHECK(t1.degree() == 1);
    CHECK(t1.coeff(0) == 1.0);
    CHECK(t1.coeff(1) == 1.0);
    CHECK(max_abs_difference(truncate(f, 2), f) == 0.0);
    CHECK(truncate(f, 0).coefficients().size() == 1);
    CHECK(truncate(f, 0).value() == 1.0);
    CHECK_THROWS_AS(truncate(f, 3), PreconditionError);

    std::mt19937 rng(3);
    Jet g = random_jet(rng, 3, 5, 0.2);
    for (int n1 = 0; n1 <= 5; ++n1) {
        for (int n2 = 0; n2 <= n1; ++n2) {
            CHECK(max_abs_difference(truncate(truncate(g, n1), n2), truncate(g, std::min(n1, n2))) == 0.0);
        }
    }
}

TEST_CASE("jet_compose examples") {
    SUBCASE("f = x + x^2, g = 2x") {
        JetMap f({poly1({0, 1, 1}, 2)});
        JetMap g({poly1({0, 2}, 2)});
        JetMap h = compose(f, g);
        CHECK(h[0].coeff(1) == 2.0);
        CHECK(h[0].coeff(2) == 4.0);
    }
    SUBCASE("identity law") {
        std::mt19937 rng(11);
        JetMap f = random_map(rng, 3, 4, false);
        CHECK(max_abs_difference(compose(f, JetMap::identity(3, 4)), f) == 0.0);
    }
    SUBCASE("associativity on random degree-3 jets") {
        std::mt19937 rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            JetMap f = random_map(rng, 2, 3, false);
            JetMap g = random_map(rng, 2, 3);
            JetMap h = random_map(rng, 2, 3);
            CHECK(max_abs_difference(compose(compose(f, g), h), compose(f, compose(g, h))) <= 1e-13);
        }
    }
    SUBCASE("nonzero inner constant needs re-centering") {
        JetMap f({poly1({0, 1, 1}, 2)});
        JetMap g({poly1({0.5, 1}, 2)});
        CHECK_THROWS_AS(compose(f, g), PreconditionError);
        JetMap h = compose(f, g, Recenter::yes);
        CHECK(h[0].coeff(1) == 1.0);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(compose(JetMap::identity(2, 2), JetMap::identity(3, 2)), DimensionError);
    }
}

TEST_CASE("jet_invert examples") {
    SUBCASE("identity") {
        JetMap g = invert(JetMap::identity(2, 3));
        CHECK(max_abs_difference(g, JetMap::identity(2, 3)) == 0.0);
    }
    SUBCASE("f = 2y + y^2 inverts to x/2 - x^2/8") {
        // a x + b x^2 with 2a = 1 and 2b + a^2 = 0
        JetMap g = invert(JetMap({poly1({0, 2, 1}, 2)}));
        CHECK(g[0].coeff(1) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(g[0].coeff(2) == doctest::Approx(-0.125).epsilon(1e-15));
    }
    SUBCASE("rotation") {
        const double th = 0.7;
        Eigen::Matrix2d r;
        r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        JetMap g = invert(JetMap::affine(Eigen::Vector2d::Zero(), r, 3));
        CHECK((g.linear_part() - r.transpose()).norm() <= 1e-15);
    }
    SUBCASE("singular and ill-conditioned linear parts") {
        Eigen::Matrix2d s;
        s << 1, 2, 2, 4;
        CHECK_THROWS_AS(invert(JetMap::affine(Eigen::Vector2d::Zero(), s, 2)), SingularError);
        Eigen::Matrix2d ill = Eigen::Matrix2d::Identity();
        ill(1, 1) = 1e-9;
        CHECK_THROWS_AS(invert(JetMap::affine(Eigen::Vector2d::Zero(), ill, 2)), SingularError);
        CHECK_NOTHROW(invert(JetMap::affine(Eigen::Vector2d::Zero(), ill, 2), 1e10));
    }
    SUBCASE("nonzero constant term") {
        CHECK_THROWS_AS(invert(JetMap({poly1({0.1, 1}, 2)})), PreconditionError);
    }
    SUBCASE("compose with inverse is the identity, both orders") {
        std::mt19937 rng(21);
        for (int trial = 0; trial < 25; ++trial) {
            const int d = 1 + trial % 4;
            const int n = 1 + trial % 4;
            JetMap f = random_map(rng, d, n);
            for (int i = 0; i < d; ++i) f[i].coeff(static_cast<std::size_t>(1 + i)) += 3.0;
            JetMap g = invert(f);
            CHECK(max_abs_difference(compose(f, g), JetMap::identity(d, n)) <= 1e-12);
            CHECK(max_abs_difference(compose(g, f), JetMap::identity(d, n)) <= 1e-12);
        }
    }
}

TEST_CASE("derivative and evaluation") {
    // f = 1 + 2x + 3xy + y^3 in two variables, degree 3
    Jet f(2, 3);
    f.set({0, 0}, 0, 1.0);
    f.set({1, 0}, 0, 2.0);
    f.set({1, 1}, 0, 3.0);
    f.set({0, 3}, 0, 1.0);
    Jet fx = derivative(f, 0);
    Jet fy = derivative(f, 1);
    CHECK(fx.degree() == 2);
    CHECK(fx.coeff(MultiIndex{0, 0}) == 2.0);
    CHECK(fx.coeff(MultiIndex{0, 1}) == 3.0);
    CHECK(fy.coeff(MultiIndex{1, 0}) == 3.0);
    CHECK(fy.coeff(MultiIndex{0, 2}) == 3.0);
    const double x[2] = {0.5, -2.0};
    CHECK(evaluate(f, x) == doctest::Approx(1 + 1 - 3 - 8));
}

TEST_CASE("elementary functions against closed-form Taylor coefficients") {
    Jet x = Jet::variable(1, 5, 0);
    Jet e = exp(x);
    double fact = 1.0;
    for (int k = 0; k <= 5; ++k) {
        if (k > 0) fact *= k;
        CHECK(e.coeff(static_cast<std::size_t>(k)) == doctest::Approx(1.0 / fact).epsilon(1e-15));
    }
    Jet l = log(1.0 + x);  // x - x^2/2 + x^3/3 ...
    for (int k = 1; k <= 5; ++k) {
        CHECK(l.coeff(static_cast<std::size_t>(k)) == doctest::Approx(((k % 2) ? 1.0 : -1.0) / k).epsilon(1e-15));
    }
    std::mt19937 rng(9);
    Jet y = random_jet(rng, 3, 4, 1.7);
    CHECK(max_abs_difference(exp(log(y)), y) <= 1e-13);
    CHECK(max_abs_difference(sqrt(y) * sqrt(y), y) <= 1e-13);
    CHECK(max_abs_difference(sin(y) * sin(y) + cos(y) * cos(y), Jet::constant(3, 4, 1.0)) <= 1e-13);
    CHECK(max_abs_difference(y / y, Jet::constant(3, 4, 1.0)) <= 1e-13);
    CHECK(max_abs_difference(pow(y, 3.0), y * y * y) <= 1e-12);
    CHECK_THROWS_AS(log(y - 5.0), PreconditionError);
    CHECK_THROWS_AS(reciprocal(y - 1.7), SingularError);
}

TEST_CASE("JSON round trip is bit-stable") {
    std::mt19937 rng(13);
    Jet a = random_jet(rng, 3, 3, 0.123456789012345678);
    Jet b = jet_from_json(nlohmann::json::parse(to_json(a).dump()));
    REQUIRE(a.same_shape(b));
    for (std::size_t i = 0; i < a.coefficients().size(); ++i) CHECK(a.coefficients()[i] == b.coefficients()[i]);
    CHECK(to_json(a).dump() == to_json(b).dump());

    JetMap m = random_map(rng, 2, 2, false);
    JetMap m2 = jet_map_from_json(nlohmann::json::parse(to_json(m).dump()));
    CHECK(max_abs_difference(m, m2) == 0.0);

    auto sparse = nlohmann::json::parse(R"({"dim_in":1,"degree":2,"value_dim":1,"coeffs":[[[2],[4.0]]]})");
    Jet s = jet_from_json(sparse);
    CHECK(s.coeff(2) == 4.0);
    CHECK(s.coeff(0) == 0.0);
    CHECK_THROWS_AS(jet_from_json(nlohmann::json::parse(R"({"dim_in":1})")), ParseError);
    CHECK_THROWS_AS(jet_from_json(nlohmann::json::parse(R"({"dim_in":1,"degree":1,"value_dim":1,"coeffs":[[[3],[1.0]]]})")),
                    ParseError);
}
