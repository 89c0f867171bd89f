#include "isojet/flip_family.hpp"

#include <cmath>

#include "isojet/error.hpp"

namespace isojet {

namespace {

struct FlipFn {
    std::vector<FlipBump> bumps;
    double scale;  // amplitude * profile(t)
    bool reflect;

    template <class S>
    void operator()(std::span<const S> x, std::span<S> g) const {
        using std::exp;
        // R_* g(x) = R g(R x) R with R = diag(1, -1)
        const S y = reflect ? -x[1] : x[1];
        S g11 = x[0] * 0.0 + 1.0;
        S g12 = x[0] * 0.0;
        S g22 = x[0] * 0.0 + 1.0;
        for (const FlipBump& b : bumps) {
            const S dx = x[0] - b.center(0);
            const S dy = y - b.center(1);
            const S phi = exp((dx * dx + dy * dy) * (-0.5 / (b.width * b.width))) * (scale * b.weight);
            g11 = g11 + phi * b.shape(0, 0);
            g12 = g12 + phi * b.shape(0, 1);
            g22 = g22 + phi * b.shape(1, 1);
        }
        if (reflect) g12 = -g12;
        g[0] = g11;
        g[1] = g12;
        g[2] = g12;
        g[3] = std::move(g22);
    }
};

Vec pair(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Mat sym(double a, double b, double c) {
    Mat m(2, 2);
    m << a, b, b, c;
    return m;
}

}  // namespace

double flip_profile(double t, double scale) {
    if (t == 0.0) return 0.0;
    return std::exp(-scale / std::abs(t));
}

std::vector<FlipBump> default_flip_bumps() {
    return {{pair(0.3, 0.2), 1.0, 0.35, sym(1.0, 0.3, -0.5)},
            {pair(-0.2, 0.35), -0.6, 0.35, sym(0.2, -0.4, 0.7)},
            {pair(0.05, -0.3), 0.8, 0.35, sym(-0.6, 0.1, 0.4)}};
}

FlipFamily build_flip_family(const FlipOptions& opt) {
    std::vector<FlipBump> bumps = opt.bumps.empty() ? default_flip_bumps() : opt.bumps;
    double bound = 0.0;
    for (const FlipBump& b : bumps) {
        if (b.center.size() != 2 || b.shape.rows() != 2 || b.shape.cols() != 2) {
            throw DimensionError("flip family: bumps live in the plane");
        }
        if (!(b.width > 0.0)) throw PreconditionError("flip family: bump width must be positive");
        bound += std::abs(b.weight) * b.shape.jacobiSvd().singularValues()(0);
    }
    if (!(opt.profile_scale > 0.0)) throw PreconditionError("flip family: profile scale must be positive");
    if (!(std::abs(opt.amplitude) * bound < 1.0)) {
        throw PreconditionError("flip family: amplitude too large, positivity of the metric is not guaranteed");
    }
    const Box region = Box::cube(2, opt.half_width);
    auto make = [bumps, opt, region](bool reflected) {
        return [bumps, opt, region, reflected](double t) -> MetricPtr {
            const double scale = opt.amplitude * flip_profile(t, opt.profile_scale);
            return make_analytic_metric(region, FlipFn{bumps, scale, reflected && t < 0.0},
                                        reflected ? "flip_target" : "flip_source");
        };
    };
    Mat r = Mat::Identity(2, 2);
    r(1, 1) = -1.0;
    return {MetricFamily(opt.t_min, opt.t_max, make(false), "flip_source"),
            MetricFamily(opt.t_min, opt.t_max, make(true), "flip_target"), r};
}

}  // namespace isojet
