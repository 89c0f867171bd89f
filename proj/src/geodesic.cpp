#include "isojet/geodesic.hpp"

#include <cmath>
#include <limits>

#include "isojet/frame.hpp"
#include "isojet/lowdisc.hpp"

namespace isojet {

std::vector<Mat> christoffel(const ChartMetric& m, const Vec& p) {
    const int d = m.dim();
    if (p.size() != d) throw DimensionError("christoffel: point has wrong dimension");
    m.require_inside(p, "christoffel");
    const Mat g = m.value(p);
    Eigen::LLT<Mat> llt(g);
    if (llt.info() != Eigen::Success) throw SingularError("christoffel: metric is not positive definite at p");
    const Mat ginv = llt.solve(Mat::Identity(d, d));
    const std::vector<Mat> dg = m.first_partials(p);
    std::vector<Mat> gamma(static_cast<std::size_t>(d), Mat::Zero(d, d));
    // lowered symbols Gamma_{l,ij} = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            Vec low(d);
            for (int l = 0; l < d; ++l) {
                low(l) = 0.5 * (dg[static_cast<std::size_t>(i)](j, l) + dg[static_cast<std::size_t>(j)](i, l) -
                                dg[static_cast<std::size_t>(l)](i, j));
            }
            const Vec up = ginv * low;
            for (int k = 0; k < d; ++k) {
                gamma[static_cast<std::size_t>(k)](i, j) = up(k);
                gamma[static_cast<std::size_t>(k)](j, i) = up(k);
            }
        }
    }
    return gamma;
}

std::vector<JetMatrix> christoffel_expansion(const ChartMetric& m, const Vec& p, int order) {
    const int d = m.dim();
    m.require_inside(p, "christoffel_expansion");
    const JetMatrix g = m.expand(p, order + 1);
    const JetMatrix ginv = g.truncated(order).inverse();
    std::vector<JetMatrix> dg;
    for (int l = 0; l < d; ++l) dg.push_back(g.derivative(l));
    std::vector<JetMatrix> gamma(static_cast<std::size_t>(d), JetMatrix(d, d, d, order));
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            std::vector<Jet> low;
            for (int l = 0; l < d; ++l) {
                Jet t = dg[static_cast<std::size_t>(i)](j, l);
                t += dg[static_cast<std::size_t>(j)](i, l);
                t -= dg[static_cast<std::size_t>(l)](i, j);
                t *= 0.5;
                low.push_back(std::move(t));
            }
            for (int k = 0; k < d; ++k) {
                Jet acc = ginv(k, 0) * low[0];
                for (int l = 1; l < d; ++l) acc += ginv(k, l) * low[static_cast<std::size_t>(l)];
                gamma[static_cast<std::size_t>(k)](j, i) = acc;
                gamma[static_cast<std::size_t>(k)](i, j) = std::move(acc);
            }
        }
    }
    return gamma;
}

double metric_norm(const ChartMetric& m, const Vec& p, const Vec& v) { return std::sqrt(v.dot(m.value(p) * v)); }

namespace {

void check_inputs(const ChartMetric& m, const Vec& p, const Vec& v, const char* what) {
    if (p.size() != m.dim() || v.size() != m.dim()) throw DimensionError(std::string(what) + ": vector has wrong dimension");
    m.require_inside(p, what);
}

struct GeodesicRhs {
    const ChartMetric& m;
    int d;

    Vec operator()(double, const Vec& y) const {
        const Vec x = y.head(d);
        if (!m.contains(x)) throw RegionError("geodesic left the region of " + m.name());
        const auto gamma = christoffel(m, x);
        Vec out(2 * d);
        out.head(d) = y.tail(d);
        const Vec v = y.tail(d);
        for (int k = 0; k < d; ++k) out(d + k) = -v.dot(gamma[static_cast<std::size_t>(k)] * v);
        return out;
    }
};

auto region_guard(const ChartMetric& m, int d) {
    return [&m, d](const Vec& y) {
        if (!m.contains(y.head(d))) throw RegionError("geodesic left the region of " + m.name());
    };
}

// Geodesic plus first variation with respect to the initial velocity.
// State: x (d), v (d), X (d*d, column-major), V (d*d).
struct VariationalRhs {
    const ChartMetric& m;
    int d;

    Vec operator()(double, const Vec& y) const {
        const Vec x = y.head(d);
        if (!m.contains(x)) throw RegionError("geodesic left the region of " + m.name());
        const Vec v = y.segment(d, d);
        const Eigen::Map<const Mat> xm(y.data() + 2 * d, d, d);
        const Eigen::Map<const Mat> vm(y.data() + 2 * d + d * d, d, d);
        const auto gamma = christoffel_expansion(m, x, 1);
        Vec out(2 * d + 2 * d * d);
        out.head(d) = v;
        Eigen::Map<Mat> dxm(out.data() + 2 * d, d, d);
        Eigen::Map<Mat> dvm(out.data() + 2 * d + d * d, d, d);
        dxm = vm;
        for (int k = 0; k < d; ++k) {
            const JetMatrix& gk = gamma[static_cast<std::size_t>(k)];
            Mat g0(d, d);
            std::vector<Mat> dg(static_cast<std::size_t>(d), Mat(d, d));
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) {
                    g0(i, j) = gk(i, j).coeff(0);
                    for (int l = 0; l < d; ++l) dg[static_cast<std::size_t>(l)](i, j) = gk(i, j).coeff(static_cast<std::size_t>(1 + l));
                }
            }
            out(d + k) = -v.dot(g0 * v);
            // d/dv0 of -Gamma^k(x)(v, v)
            Eigen::RowVectorXd row = -2.0 * (g0 * v).transpose() * vm;
            for (int l = 0; l < d; ++l) row -= v.dot(dg[static_cast<std::size_t>(l)] * v) * xm.row(l);
            dvm.row(k) = row;
        }
        return out;
    }
};

}  // namespace

Vec exp_map(const ChartMetric& m, const Vec& p, const Vec& v, const OdeOptions& opt) {
    check_inputs(m, p, v, "exp_map");
    const int d = m.dim();
    if (v.isZero(0.0)) return p;
    Vec y(2 * d);
    y << p, v;
    y = integrate_dopri5(GeodesicRhs{m, d}, y, 0.0, 1.0, opt, region_guard(m, d));
    return y.head(d);
}

std::vector<GeodesicSample> geodesic_path(const ChartMetric& m, const Vec& p, const Vec& v, double s_end, int count,
                                          const OdeOptions& opt) {
    check_inputs(m, p, v, "geodesic_path");
    if (count < 1 || !(s_end > 0.0)) throw PreconditionError("geodesic_path: need count >= 1 and s_end > 0");
    const int d = m.dim();
    Vec y(2 * d);
    y << p, v;
    std::vector<GeodesicSample> out;
    out.push_back({0.0, p, v});
    OdeOptions piece = opt;
    piece.min_step = opt.min_step * count;
    piece.max_step = std::min(1.0, opt.max_step * count);
    for (int k = 1; k <= count; ++k) {
        const double s0 = s_end * (k - 1) / count;
        const double s1 = s_end * k / count;
        y = integrate_dopri5(GeodesicRhs{m, d}, y, s0, s1, piece, region_guard(m, d));
        out.push_back({s1, y.head(d), y.tail(d)});
    }
    return out;
}

namespace {

Vec variational_initial(const Vec& p, const Vec& v) {
    const int d = static_cast<int>(p.size());
    Vec y = Vec::Zero(2 * d + 2 * d * d);
    y.head(d) = p;
    y.segment(d, d) = v;
    Eigen::Map<Mat>(y.data() + 2 * d + d * d, d, d).setIdentity();
    return y;
}

}  // namespace

ExpDifferential exp_with_differential(const ChartMetric& m, const Vec& p, const Vec& v, const OdeOptions& opt) {
    check_inputs(m, p, v, "exp_with_differential");
    const int d = m.dim();
    Vec y = integrate_dopri5(VariationalRhs{m, d}, variational_initial(p, v), 0.0, 1.0, opt, region_guard(m, d));
    return {y.head(d), Eigen::Map<const Mat>(y.data() + 2 * d, d, d)};
}

// ------------------------------------------------------------- jet transport

namespace {

struct JetTransportRhs {
    const ChartMetric& m;
    int d;
    int degree;
    std::size_t monomials;
    mutable Vec cached_at;
    mutable std::vector<JetMatrix> cached_gamma;

    Jet unpack(const Vec& y, int comp) const {
        const double* base = y.data() + static_cast<std::size_t>(comp) * monomials;
        return Jet::from_coefficients(d, degree, 1, std::vector<double>(base, base + monomials));
    }

    const std::vector<JetMatrix>& gamma_at(const Vec& x0) const {
        if (cached_gamma.empty() || cached_at != x0) {
            cached_gamma = christoffel_expansion(m, x0, degree);
            cached_at = x0;
        }
        return cached_gamma;
    }

    Vec operator()(double, const Vec& y) const {
        std::vector<Jet> x;
        std::vector<Jet> v;
        Vec x0(d);
        for (int i = 0; i < d; ++i) {
            x.push_back(unpack(y, i));
            v.push_back(unpack(y, d + i));
            x0(i) = x.back().value();
        }
        if (!m.contains(x0)) throw RegionError("geodesic left the region of " + m.name());
        const auto& gamma = gamma_at(x0);
        const JetMap centered = JetMap(x).centered();
        const MonomialPowers powers(centered, degree);

        // vv[i][j] = v_i v_j for i <= j
        std::vector<Jet> vv(static_cast<std::size_t>(d * d));
        for (int i = 0; i < d; ++i) {
            for (int j = i; j < d; ++j) vv[static_cast<std::size_t>(i * d + j)] = v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)];
        }
        Vec out(y.size());
        std::copy(y.data() + static_cast<std::size_t>(d) * monomials, y.data() + 2 * static_cast<std::size_t>(d) * monomials,
                  out.data());
        for (int k = 0; k < d; ++k) {
            Jet acc(d, degree);
            for (int i = 0; i < d; ++i) {
                for (int j = i; j < d; ++j) {
                    const Jet gk = powers.apply(gamma[static_cast<std::size_t>(k)](i, j));
                    acc.add_scaled(gk * vv[static_cast<std::size_t>(i * d + j)], i == j ? -1.0 : -2.0);
                }
            }
            const auto c = acc.coefficients();
            std::copy(c.begin(), c.end(), out.data() + static_cast<std::size_t>(d + k) * monomials);
        }
        return out;
    }
};

}  // namespace

JetMap exp_jet(const ChartMetric& m, const Vec& p, const Vec& v0, const Mat& linear, int degree, const OdeOptions& opt) {
    check_inputs(m, p, v0, "exp_jet");
    const int d = m.dim();
    if (linear.rows() != d || linear.cols() != d) throw DimensionError("exp_jet: linear map has wrong shape");
    if (degree < 0) throw PreconditionError("exp_jet: negative degree");
    const std::size_t mono = JetLayout::get(d, degree)->size();
    Vec y = Vec::Zero(static_cast<Eigen::Index>(2 * static_cast<std::size_t>(d) * mono));
    for (int i = 0; i < d; ++i) {
        y(static_cast<Eigen::Index>(static_cast<std::size_t>(i) * mono)) = p(i);
        const std::size_t vbase = static_cast<std::size_t>(d + i) * mono;
        y(static_cast<Eigen::Index>(vbase)) = v0(i);
        for (int j = 0; j < d && degree >= 1; ++j) y(static_cast<Eigen::Index>(vbase + 1 + static_cast<std::size_t>(j))) = linear(i, j);
    }
    JetTransportRhs rhs{m, d, degree, mono, Vec(), {}};
    y = integrate_dopri5(rhs, y, 0.0, 1.0, opt, [&](const Vec& state) {
        Vec x0(d);
        for (int i = 0; i < d; ++i) x0(i) = state(static_cast<Eigen::Index>(static_cast<std::size_t>(i) * mono));
        if (!m.contains(x0)) throw RegionError("geodesic left the region of " + m.name());
    });
    std::vector<Jet> comps;
    for (int i = 0; i < d; ++i) comps.push_back(rhs.unpack(y, i));
    return JetMap(std::move(comps));
}

// ------------------------------------------------------------------ log map

Vec log_map(const ChartMetric& m, const Vec& p, const Vec& q, const LogOptions& opt) {
    check_inputs(m, p, q, "log_map");
    const double tol = opt.tolerance * (1.0 + q.norm());
    Vec v = q - p;
    if (v.isZero(0.0)) return v;
    ExpDifferential cur = exp_with_differential(m, p, v, opt.ode);
    double res = (q - cur.point).norm();
    for (int it = 0; it < opt.max_iterations; ++it) {
        if (res <= tol) return v;
        const Vec step = cur.jacobian.partialPivLu().solve(q - cur.point);
        if (!step.allFinite()) throw ConvergenceError("log_map: singular differential of exp");
        double lambda = 1.0;
        bool improved = false;
        for (int half = 0; half < 12; ++half, lambda *= 0.5) {
            const Vec trial = v + lambda * step;
            try {
                ExpDifferential next = exp_with_differential(m, p, trial, opt.ode);
                const double r = (q - next.point).norm();
                if (r < res) {
                    v = trial;
                    cur = std::move(next);
                    res = r;
                    improved = true;
                    break;
                }
            } catch (const RegionError&) {
            } catch (const ConvergenceError&) {
            }
        }
        if (!improved) break;
    }
    if (res <= tol) return v;
    throw ConvergenceError("log_map: shooting did not converge (residual " + std::to_string(res) + ")");
}

double distance(const ChartMetric& m, const Vec& p, const Vec& q, const LogOptions& opt) {
    return metric_norm(m, p, log_map(m, p, q, opt));
}

// ------------------------------------------------------- injectivity floor

double injectivity_radius_floor(const ChartMetric& m, const Vec& p, double r_max, const InjectivityOptions& opt) {
    if (!(r_max > 0.0) || opt.radii < 1 || opt.directions < 1) {
        throw PreconditionError("injectivity_radius_floor: need r_max > 0 and a nonempty net");
    }
    m.require_inside(p, "injectivity_radius_floor");
    const int d = m.dim();
    const Frame frame = standard_frame(m, p);
    const auto dirs = direction_net(d, static_cast<std::size_t>(opt.directions));
    const int nr = opt.radii;

    // images[j][k] = exp_p at radius level k + 1 along direction j
    std::vector<std::vector<Vec>> images(dirs.size());
    std::size_t min_levels = static_cast<std::size_t>(nr);
    OdeOptions piece = opt.ode;
    piece.min_step = opt.ode.min_step * nr;
    piece.max_step = std::min(1.0, opt.ode.max_step * nr);
    for (std::size_t j = 0; j < dirs.size() && min_levels > 0; ++j) {
        const Vec u = Eigen::Map<const Vec>(dirs[j].data(), d);
        Vec y = variational_initial(p, frame.to_tangent(u));
        for (int k = 1; k <= nr; ++k) {
            const double s0 = r_max * (k - 1) / nr;
            const double s1 = r_max * k / nr;
            try {
                y = integrate_dopri5(VariationalRhs{m, d}, y, s0, s1, piece, region_guard(m, d));
            } catch (const RegionError&) {
                break;
            } catch (const ConvergenceError&) {
                break;
            }
            // d(exp_p) at s1 * v0 equals X(s1) / s1
            const Mat dexp = Eigen::Map<const Mat>(y.data() + 2 * d, d, d) / s1;
            if (!(dexp.determinant() > 0.0) || condition_number(dexp) > opt.max_condition) break;
            images[j].push_back(y.head(d));
        }
        min_levels = std::min(min_levels, images[j].size());
    }

    const double eps = opt.coincidence * m.region().scale();
    std::vector<Vec> accepted;
    for (std::size_t k = 0; k < min_levels; ++k) {
        for (const auto& ray : images) {
            const Vec& x = ray[k];
            for (const Vec& other : accepted) {
                if ((x - other).norm() <= eps) return k == 0 ? 0.0 : r_max * static_cast<double>(k) / nr;
            }
            accepted.push_back(x);
        }
    }
    return r_max * static_cast<double>(min_levels) / nr;
}

}  // namespace isojet
