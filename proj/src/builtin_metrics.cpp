#include "isojet/builtin_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "isojet/scalar.hpp"

namespace isojet {

namespace {

struct EuclideanFn {
    int d;
    template <class S>
    void operator()(std::span<const S> x, std::span<S> g) const {
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) g[static_cast<std::size_t>(i * d + j)] = constant_like(x[0], i == j ? 1.0 : 0.0);
        }
    }
};

template <class S>
void write_conformal(std::span<S> g, int d, const S& factor) {
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            g[static_cast<std::size_t>(i * d + j)] = i == j ? factor : factor * 0.0;
        }
    }
}

struct ConformalFn {
    int d;
    std::vector<GaussianBump> bumps;
    template <class S>
    void operator()(std::span<const S> x, std::span<S> g) const {
        using std::exp;
        S phi = x[0] * 0.0;
        for (const auto& b : bumps) {
            S r2 = x[0] * 0.0;
            for (int i = 0; i < d; ++i) {
                const S dx = x[static_cast<std::size_t>(i)] - b.center(i);
                r2 = r2 + dx * dx;
            }
            phi = phi + b.amplitude * exp(r2 * (-0.5 / (b.width * b.width)));
        }
        write_conformal(g, d, S(exp(phi * 2.0)));
    }
};

struct PoincareFn {
    template <class S>
    void operator()(std::span<const S> x, std::span<S> g) const {
        const S w = 1.0 - (x[0] * x[0] + x[1] * x[1]);
        write_conformal(g, 2, S(4.0 / (w * w)));
    }
};

struct SphereFn {
    int d;
    double radius;
    template <class S>
    void operator()(std::span<const S> x, std::span<S> g) const {
        S w = x[0] * 0.0 + 1.0;
        for (int i = 0; i < d; ++i) w = w + x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
        write_conformal(g, d, S((4.0 * radius * radius) / (w * w)));
    }
};

// Interpolating uniform cubic B-spline with natural end conditions: maps n
// samples to n + 2 control coefficients.
Mat spline_solve_matrix(int n) {
    const int m = n + 2;
    Mat a = Mat::Zero(m, m);
    Mat rhs = Mat::Zero(m, n);
    a(0, 0) = 1.0;
    a(0, 1) = -2.0;
    a(0, 2) = 1.0;
    for (int k = 0; k < n; ++k) {
        a(k + 1, k) = 1.0 / 6.0;
        a(k + 1, k + 1) = 4.0 / 6.0;
        a(k + 1, k + 2) = 1.0 / 6.0;
        rhs(k + 1, k) = 1.0;
    }
    a(m - 1, m - 3) = 1.0;
    a(m - 1, m - 2) = -2.0;
    a(m - 1, m - 1) = 1.0;
    return a.partialPivLu().solve(rhs);
}

struct GridData {
    int d = 0;
    int n = 0;
    Vec lower;
    Vec step;
    // control coefficients per symmetric entry, (n + 2)^d each, axis 0 fastest
    std::vector<std::vector<double>> coeffs;
};

struct GridFn {
    std::shared_ptr<const GridData> data;

    template <class S>
    void operator()(std::span<const S> x, std::span<S> g) const {
        const GridData& gd = *data;
        const int d = gd.d;
        const int m = gd.n + 2;
        // per-axis cell and basis values
        std::vector<int> cell(static_cast<std::size_t>(d));
        std::vector<S> basis;
        basis.reserve(static_cast<std::size_t>(4 * d));
        for (int i = 0; i < d; ++i) {
            const S u = (x[static_cast<std::size_t>(i)] - gd.lower(i)) / gd.step(i);
            const int j = std::clamp(static_cast<int>(std::floor(constant_part(u))), 0, gd.n - 2);
            cell[static_cast<std::size_t>(i)] = j;
            const S t = u - static_cast<double>(j);
            const S t2 = t * t;
            const S t3 = t2 * t;
            const S s = 1.0 - t;
            basis.push_back(s * s * s / 6.0);
            basis.push_back((t3 * 3.0 - t2 * 6.0 + 4.0) / 6.0);
            basis.push_back((t3 * -3.0 + t2 * 3.0 + t * 3.0 + 1.0) / 6.0);
            basis.push_back(t3 / 6.0);
        }
        int terms = 1;
        for (int i = 0; i < d; ++i) terms *= 4;
        std::vector<S> weights;
        std::vector<std::size_t> offsets;
        weights.reserve(static_cast<std::size_t>(terms));
        for (int k = 0; k < terms; ++k) {
            int rem = k;
            std::size_t off = 0;
            std::size_t stride = 1;
            S w = basis[static_cast<std::size_t>(rem % 4)];
            off += static_cast<std::size_t>(cell[0] + rem % 4) * stride;
            rem /= 4;
            stride *= static_cast<std::size_t>(m);
            for (int i = 1; i < d; ++i) {
                const int a = rem % 4;
                rem /= 4;
                w = w * basis[static_cast<std::size_t>(4 * i + a)];
                off += static_cast<std::size_t>(cell[static_cast<std::size_t>(i)] + a) * stride;
                stride *= static_cast<std::size_t>(m);
            }
            weights.push_back(std::move(w));
            offsets.push_back(off);
        }
        std::size_t entry = 0;
        for (int i = 0; i < d; ++i) {
            for (int j = i; j < d; ++j, ++entry) {
                const auto& c = gd.coeffs[entry];
                S v = weights[0] * c[offsets[0]];
                for (std::size_t k = 1; k < weights.size(); ++k) v = v + weights[k] * c[offsets[k]];
                g[static_cast<std::size_t>(j * d + i)] = v;
                g[static_cast<std::size_t>(i * d + j)] = std::move(v);
            }
        }
    }
};

double squared_norm(const Vec& p) { return p.squaredNorm(); }

}  // namespace

MetricPtr make_euclidean(int dim, double half_width) {
    if (dim < 1) throw DimensionError("euclidean: dimension must be positive");
    return make_analytic_metric(Box::cube(dim, half_width), EuclideanFn{dim}, "euclidean");
}

MetricPtr make_conformal_scalar(int dim, std::vector<GaussianBump> bumps, double half_width) {
    if (dim < 1) throw DimensionError("conformal_scalar: dimension must be positive");
    for (const auto& b : bumps) {
        if (b.center.size() != dim) throw DimensionError("conformal_scalar: bump center has wrong dimension");
        if (!(b.width > 0.0)) throw PreconditionError("conformal_scalar: bump width must be positive");
    }
    return make_analytic_metric(Box::cube(dim, half_width), ConformalFn{dim, std::move(bumps)}, "conformal_scalar");
}

MetricPtr make_poincare_disc() {
    return make_analytic_metric(Box::cube(2, 1.0), PoincareFn{}, "poincare_disc",
                                [](const Vec& p) { return squared_norm(p) < 1.0; });
}

MetricPtr make_sphere_patch(int dim, double radius, double half_width) {
    if (dim < 1) throw DimensionError("sphere_patch: dimension must be positive");
    if (!(radius > 0.0)) throw PreconditionError("sphere_patch: radius must be positive");
    return make_analytic_metric(Box::cube(dim, half_width), SphereFn{dim, radius}, "sphere_patch");
}

MetricPtr make_custom_grid(const Box& region, int nodes, const std::function<Mat(const Vec&)>& sample,
                           std::string name) {
    const int d = region.dim();
    if (nodes < 4) throw PreconditionError("custom_grid: need at least 4 nodes per axis");
    auto data = std::make_shared<GridData>();
    data->d = d;
    data->n = nodes;
    data->lower = region.lower;
    data->step = (region.upper - region.lower) / static_cast<double>(nodes - 1);
    const int m = nodes + 2;

    std::size_t total = 1;
    std::size_t ctotal = 1;
    for (int i = 0; i < d; ++i) {
        total *= static_cast<std::size_t>(nodes);
        ctotal *= static_cast<std::size_t>(m);
    }
    const int entries = d * (d + 1) / 2;
    std::vector<std::vector<double>> values(static_cast<std::size_t>(entries), std::vector<double>(total));
    for (std::size_t s = 0; s < total; ++s) {
        std::size_t rem = s;
        Vec x(d);
        for (int i = 0; i < d; ++i) {
            x(i) = region.lower(i) + static_cast<double>(rem % static_cast<std::size_t>(nodes)) * data->step(i);
            rem /= static_cast<std::size_t>(nodes);
        }
        const Mat g = sample(x);
        std::size_t e = 0;
        for (int i = 0; i < d; ++i) {
            for (int j = i; j < d; ++j, ++e) values[e][s] = 0.5 * (g(i, j) + g(j, i));
        }
    }

    // one axis at a time: extent along processed axes is m, along the rest `nodes`
    const Mat solve = spline_solve_matrix(nodes);
    data->coeffs.resize(static_cast<std::size_t>(entries));
    for (int e = 0; e < entries; ++e) {
        std::vector<double> cur = values[static_cast<std::size_t>(e)];
        std::vector<int> extent(static_cast<std::size_t>(d), nodes);
        for (int axis = 0; axis < d; ++axis) {
            std::vector<int> next_extent = extent;
            next_extent[static_cast<std::size_t>(axis)] = m;
            std::size_t inner = 1;
            for (int i = 0; i < axis; ++i) inner *= static_cast<std::size_t>(extent[static_cast<std::size_t>(i)]);
            std::size_t outer = 1;
            for (int i = axis + 1; i < d; ++i) outer *= static_cast<std::size_t>(extent[static_cast<std::size_t>(i)]);
            std::vector<double> out(inner * static_cast<std::size_t>(m) * outer, 0.0);
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    for (int r = 0; r < m; ++r) {
                        double acc = 0.0;
                        for (int k = 0; k < nodes; ++k) {
                            acc += solve(r, k) * cur[in + inner * (static_cast<std::size_t>(k) + static_cast<std::size_t>(nodes) * o)];
                        }
                        out[in + inner * (static_cast<std::size_t>(r) + static_cast<std::size_t>(m) * o)] = acc;
                    }
                }
            }
            cur = std::move(out);
            extent = std::move(next_extent);
        }
        if (cur.size() != ctotal) throw DimensionError("custom_grid: internal size mismatch");
        data->coeffs[static_cast<std::size_t>(e)] = std::move(cur);
    }
    return make_analytic_metric(region, GridFn{std::move(data)}, std::move(name));
}

double MetricSpec::number(const std::string& key, double fallback) const {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    if (it->second.size() != 1) throw PreconditionError("metric parameter '" + key + "' must be a single number");
    return it->second.front();
}

std::vector<std::string> builtin_metric_ids() {
    return {"euclidean", "conformal_scalar", "poincare_disc", "sphere_patch", "custom_grid"};
}

MetricPtr make_builtin_metric(const MetricSpec& spec) {
    const auto dim_of = [&](int fallback) {
        const double d = spec.number("dim", fallback);
        if (d < 1 || d != std::floor(d)) throw PreconditionError("metric parameter 'dim' must be a positive integer");
        return static_cast<int>(d);
    };
    if (spec.id == "euclidean") return make_euclidean(dim_of(2), spec.number("half_width", 10.0));
    if (spec.id == "poincare_disc") return make_poincare_disc();
    if (spec.id == "sphere_patch") {
        return make_sphere_patch(dim_of(2), spec.number("radius", 1.0), spec.number("half_width", 1.5));
    }
    if (spec.id == "conformal_scalar") {
        const int d = dim_of(2);
        // bumps: flat list of (center..., amplitude, width) records
        std::vector<GaussianBump> bumps;
        if (auto it = spec.params.find("bumps"); it != spec.params.end()) {
            const auto& v = it->second;
            const std::size_t rec = static_cast<std::size_t>(d + 2);
            if (v.size() % rec != 0) throw PreconditionError("conformal_scalar: 'bumps' length must be a multiple of dim + 2");
            for (std::size_t k = 0; k < v.size(); k += rec) {
                GaussianBump b;
                b.center = Eigen::Map<const Vec>(v.data() + k, d);
                b.amplitude = v[k + static_cast<std::size_t>(d)];
                b.width = v[k + static_cast<std::size_t>(d) + 1];
                bumps.push_back(std::move(b));
            }
        }
        return make_conformal_scalar(d, std::move(bumps), spec.number("half_width", 2.0));
    }
    if (spec.id == "custom_grid") {
        if (!spec.source) throw PreconditionError("custom_grid needs a 'source' metric to sample");
        const MetricPtr src = make_builtin_metric(*spec.source);
        const double hw = spec.number("half_width", 1.0);
        const int nodes = static_cast<int>(spec.number("nodes", 33));
        Box box = Box::cube(src->dim(), hw);
        return make_custom_grid(box, nodes, [src](const Vec& x) { return src->value(x); });
    }
    throw PreconditionError("unknown metric id '" + spec.id + "'");
}

}  // namespace isojet
