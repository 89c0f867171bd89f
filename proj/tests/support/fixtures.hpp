#pragma once

// Shared scenario pieces for the unit and acceptance tests.

#include <cmath>
#include <complex>

#include "isojet/builtin_metrics.hpp"
#include "isojet/frame.hpp"
#include "isojet/isometry.hpp"

namespace fixtures {

using isojet::Mat;
using isojet::Vec;

inline Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

inline Mat rotation(double a) {
    Mat r(2, 2);
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return r;
}

inline Mat complex_as_matrix(std::complex<double> c) {
    Mat m(2, 2);
    m << c.real(), -c.imag(), c.imag(), c.real();
    return m;
}

inline isojet::MetricPtr bumpy_metric() {
    return isojet::make_conformal_scalar(2, {{vec2(0.3, -0.2), 0.4, 0.5}, {vec2(-0.4, 0.5), -0.25, 0.35}}, 2.0);
}

/// Poincare disc g and its pushforward g_hat = f_* g under a disc automorphism f.
struct Moebius {
    isojet::MetricPtr g = isojet::make_poincare_disc();
    isojet::MobiusCoefficients f = isojet::MobiusCoefficients::disc_automorphism(0.6, {0.25, -0.1});
    isojet::MetricPtr pushed = isojet::make_pushforward(g, isojet::make_mobius_map(f.inverse()), isojet::Box::cube(2, 1.0),
                                                        "poincare_pushed",
                                                        [](const Vec& x) { return x.squaredNorm() < 1.0; });

    Vec map(const Vec& x) const {
        const auto w = f({x(0), x(1)});
        return vec2(w.real(), w.imag());
    }
    Mat differential(const Vec& x) const { return complex_as_matrix(f.derivative({x(0), x(1)})); }

    /// frame (p, B) -> (f(p), f'(p) B)
    isojet::Frame transport(const isojet::Frame& b) const { return {map(b.point), differential(b.point) * b.basis}; }

    isojet::OneJet one_jet(const Vec& x) const { return {x, map(x), differential(x)}; }
};

}  // namespace fixtures
