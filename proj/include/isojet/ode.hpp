#pragma once

// Dormand-Prince 5(4) with embedded error control. The state is a flat
// Eigen vector; jet-valued systems pack their coefficients into it.

#include <algorithm>
#include <cmath>
#include <functional>

#include "isojet/error.hpp"
#include "isojet/linalg.hpp"

namespace isojet {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-10;
    double initial_step = 0.0;  // 0 picks a step from the first derivative
    double min_step = 1e-12;
    double max_step = 0.25;
    int max_steps = 200000;
};

struct OdeStats {
    int accepted = 0;
    int rejected = 0;
};

/// Integrates y' = f(s, y) from s0 to s1 (s1 > s0). `accept(y)` is called on
/// every accepted state and may throw to abort.
template <class Rhs, class Accept>
Vec integrate_dopri5(Rhs&& f, Vec y, double s0, double s1, const OdeOptions& opt, Accept&& accept,
                     OdeStats* stats = nullptr) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    const double span = s1 - s0;
    if (span <= 0.0) return y;

    Vec k1 = f(s0, y);
    double h = opt.initial_step;
    if (h <= 0.0) {
        const Vec sc = (opt.atol + opt.rtol * y.array().abs()).matrix();
        const double d0 = std::sqrt((y.array() / sc.array()).square().mean());
        const double d1 = std::sqrt((k1.array() / sc.array()).square().mean());
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-3 : 0.01 * d0 / d1;
        h = std::clamp(h * span, 1e-6 * span, opt.max_step * span);
    }

    double s = s0;
    Vec k2, k3, k4, k5, k6, k7, ytmp, ynew, err;
    int steps = 0;
    while (s < s1) {
        if (++steps > opt.max_steps) throw ConvergenceError("ODE integration exceeded the step budget");
        const bool last = s + h >= s1;
        if (last) h = s1 - s;

        ytmp = y + h * a21 * k1;
        k2 = f(s + c2 * h, ytmp);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        k3 = f(s + c3 * h, ytmp);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        k4 = f(s + c4 * h, ytmp);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        k5 = f(s + c5 * h, ytmp);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        k6 = f(s + h, ytmp);
        ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        k7 = f(s + h, ynew);
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        const Eigen::ArrayXd scale = opt.atol + opt.rtol * y.array().abs().max(ynew.array().abs());
        double en = std::sqrt((err.array() / scale).square().mean());
        if (!std::isfinite(en)) en = 1e10;

        if (en <= 1.0) {
            accept(ynew);
            s = last ? s1 : s + h;
            y.swap(ynew);
            k1.swap(k7);
            if (stats) ++stats->accepted;
            const double fac = en == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(en, -0.2));
            h = std::min(h * fac, opt.max_step * span);
        } else {
            if (stats) ++stats->rejected;
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
            if (h < opt.min_step * span) throw ConvergenceError("ODE step size underflow");
        }
    }
    return y;
}

}  // namespace isojet
