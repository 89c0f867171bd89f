#include "isojet/isometry.hpp"

#include <cmath>

#include "isojet/lowdisc.hpp"
#include "isojet/parallel.hpp"

namespace isojet {

double one_jet_defect(const ChartMetric& g, const ChartMetric& g_hat, const OneJet& j) {
    return (j.linear.transpose() * g_hat.value(j.image) * j.linear - g.value(j.source)).cwiseAbs().maxCoeff();
}

AtlasVerdict check_atlas_isometry(const ChartMetric& g, const ChartMetric& g_hat, const BallAtlas& a,
                                  const BallAtlas& a_hat, int n, double tol, const InvariantOptions& opt) {
    if (a.size() != a_hat.size()) throw PreconditionError("check_atlas_isometry: atlases differ in size");
    if (g.dim() != g_hat.dim()) throw DimensionError("check_atlas_isometry: metrics differ in dimension");
    AtlasVerdict verdict;
    if (a.edges != a_hat.edges) {
        verdict.reason = "edge sets differ";
        return verdict;
    }
    verdict.witness = worst_gap(signature(g, a, n, opt), signature(g_hat, a_hat, n, opt));
    verdict.match = verdict.witness.gap < tol;
    if (!verdict.match) verdict.reason = "signature gap exceeds tolerance";
    return verdict;
}

LocalIsometry make_local_isometry(MetricPtr g, MetricPtr g_hat, const BallAtlas& a, const BallAtlas& a_hat) {
    if (a.size() != a_hat.size()) throw PreconditionError("make_local_isometry: atlases differ in size");
    return {std::move(g), std::move(g_hat), a.frames, a_hat.frames, a.delta, a.edges};
}

Vec local_map_eval(const LocalIsometry& l, int i, const Vec& x, const LogOptions& opt) {
    if (i < 0 || i >= static_cast<int>(l.source.size())) throw PreconditionError("local_map_eval: ball index out of range");
    const Frame& b = l.source[static_cast<std::size_t>(i)];
    const Frame& bh = l.target[static_cast<std::size_t>(i)];
    Vec v;
    try {
        v = log_map(*l.g, b.point, x, opt);
    } catch (const ConvergenceError&) {
        throw PreconditionError("local_map_eval: point is outside the normal ball");
    }
    if (metric_norm(*l.g, b.point, v) > l.delta * (1.0 + 1e-9)) {
        throw PreconditionError("local_map_eval: point is outside the delta-ball");
    }
    const Vec y = b.from_tangent(l.g->value(b.point), v);
    return exp_map(*l.g_hat, bh.point, bh.to_tangent(y), opt.ode);
}

double overlap_discrepancy(const LocalIsometry& l, int samples, const LogOptions& opt) {
    if (l.edges.empty() || samples <= 0) return 0.0;
    const int d = l.g->dim();
    const std::size_t ne = l.edges.size();
    std::vector<double> worst(ne, 0.0);
    parallel_for(ne, [&](std::size_t e) {
        const auto [i, j] = l.edges[e];
        const int want = samples / static_cast<int>(ne) + (static_cast<int>(e) < samples % static_cast<int>(ne) ? 1 : 0);
        const Frame& bi = l.source[static_cast<std::size_t>(i)];
        const Frame& bj = l.source[static_cast<std::size_t>(j)];
        KroneckerSequence seq(d + 1, 0.5 + 0.1 * static_cast<double>(e));
        int found = 0;
        for (std::size_t k = 0; found < want && k < 200000; ++k) {
            // point in the unit ball: uniform cube sample, rejected outside
            std::vector<double> u = seq.point(k);
            Vec y(d);
            for (int c = 0; c < d; ++c) y(c) = 2.0 * u[static_cast<std::size_t>(c)] - 1.0;
            if (y.squaredNorm() >= 1.0) continue;
            Vec x;
            try {
                x = exp_map(*l.g, bi.point, bi.to_tangent(l.delta * y), opt.ode);
                if (distance(*l.g, bj.point, x, opt) >= l.delta) continue;
                const double gap = (local_map_eval(l, i, x, opt) - local_map_eval(l, j, x, opt)).norm();
                worst[e] = std::max(worst[e], gap);
                ++found;
            } catch (const RegionError&) {
            } catch (const ConvergenceError&) {
            } catch (const PreconditionError&) {
            }
        }
    });
    double out = 0.0;
    for (double w : worst) out = std::max(out, w);
    return out;
}

double efp_residual(const ChartMetric& g, const ChartMetric& g_hat, const OneJet& j, const Vec& v,
                    const std::function<Vec(const Vec&)>& candidate, const OdeOptions& opt) {
    const Vec lhs = exp_map(g_hat, j.image, j.linear * v, opt);
    const Vec rhs = candidate(exp_map(g, j.source, v, opt));
    return (lhs - rhs).norm();
}

std::vector<Vec> refine_path(const ChartMetric& g, const std::vector<Vec>& path, double step, const LogOptions& opt) {
    if (path.empty()) throw PreconditionError("refine_path: empty path");
    if (!(step > 0.0)) throw PreconditionError("refine_path: step must be positive");
    std::vector<Vec> out{path.front()};
    for (std::size_t k = 1; k < path.size(); ++k) {
        const Vec& a = path[k - 1];
        const Vec& b = path[k];
        int pieces = 1;
        for (;; pieces *= 2) {
            if (pieces > (1 << 20)) throw PreconditionError("refine_path: cannot certify the ball chain");
            bool ok = true;
            for (int s = 0; s < pieces && ok; ++s) {
                const Vec x0 = a + (b - a) * (static_cast<double>(s) / pieces);
                const Vec x1 = a + (b - a) * (static_cast<double>(s + 1) / pieces);
                try {
                    ok = distance(g, x0, x1, opt) < step;
                } catch (const ConvergenceError&) {
                    ok = false;
                }
            }
            if (ok) break;
        }
        for (int s = 1; s <= pieces; ++s) out.push_back(a + (b - a) * (static_cast<double>(s) / pieces));
    }
    return out;
}

namespace {

// Closest (g, g_hat)-orthogonal map to D; also reports how far D was from it.
Mat reorthonormalize(const Mat& d, const Mat& g, const Mat& g_hat, double* drift) {
    const Mat gh_half = spd_sqrt(g_hat);
    const Mat m = gh_half * d * spd_inverse_sqrt(g);
    const Mat u = polar_orthogonal(m);
    *drift = (m - u).cwiseAbs().maxCoeff();
    return gh_half.inverse() * u * spd_sqrt(g);
}

}  // namespace

std::vector<OneJet> propagate_one_jet(const ChartMetric& g, const ChartMetric& g_hat, const OneJet& j0,
                                      const std::vector<Vec>& path, const PropagationOptions& opt) {
    if (path.empty() || (path.front() - j0.source).norm() > 1e-12 * (1.0 + j0.source.norm())) {
        throw PreconditionError("propagate_one_jet: path must start at the seed's source point");
    }
    const std::vector<Vec> nodes = refine_path(g, path, opt.step, opt.log);
    std::vector<OneJet> out{j0};
    for (std::size_t k = 1; k < nodes.size(); ++k) {
        const OneJet& cur = out.back();
        Vec v;
        try {
            v = log_map(g, cur.source, nodes[k], opt.log);
        } catch (const ConvergenceError&) {
            throw PreconditionError("propagate_one_jet: consecutive nodes are not in a common normal ball");
        }
        const Vec w = cur.linear * v;
        const ExpDifferential src = exp_with_differential(g, cur.source, v, opt.ode);
        const ExpDifferential dst = exp_with_differential(g_hat, cur.image, w, opt.ode);
        // F = exp_q o D o log_p, so dF(x) = d exp_q(D v) D (d exp_p(v))^{-1}
        const Mat raw = dst.jacobian * cur.linear * src.jacobian.inverse();
        double drift = 0.0;
        const Mat lin = reorthonormalize(raw, g.value(nodes[k]), g_hat.value(dst.point), &drift);
        if (drift > opt.drift_tolerance) {
            throw ConvergenceError("propagate_one_jet: orthogonality drift " + std::to_string(drift) + " exceeds tolerance");
        }
        out.push_back({nodes[k], dst.point, lin});
    }
    return out;
}

Vec evaluate_global(const ChartMetric& g, const ChartMetric& g_hat, const OneJet& j0, const Vec& x,
                    const PropagationOptions& opt) {
    if ((x - j0.source).norm() == 0.0) return j0.image;
    return propagate_one_jet(g, g_hat, j0, {j0.source, x}, opt).back().image;
}

namespace {

nlohmann::json matrix_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json vector_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

nlohmann::json to_json(const OneJet& j) {
    return {{"source", vector_json(j.source)}, {"image", vector_json(j.image)}, {"linear", matrix_json(j.linear)}};
}

nlohmann::json to_json(const AtlasVerdict& v) {
    nlohmann::json out = {{"match", v.match}, {"reason", v.reason}};
    if (v.witness.index >= 0) {
        out["witness"] = {{"kind", v.witness.kind},
                          {"index", v.witness.index},
                          {"component", v.witness.component},
                          {"alpha", v.witness.alpha.exponents()},
                          {"gap", v.witness.gap}};
    }
    return out;
}

}  // namespace isojet
