#include "isojet/invariants.hpp"

#include <cmath>

#include "isojet/jets_json.hpp"
#include "isojet/parallel.hpp"

namespace isojet {

std::vector<Edge> overlap_edges(const ChartMetric& m, const std::vector<Frame>& frames, double delta,
                                const LogOptions& opt) {
    std::vector<Edge> candidates;
    for (int i = 0; i < static_cast<int>(frames.size()); ++i) {
        for (int j = i + 1; j < static_cast<int>(frames.size()); ++j) candidates.emplace_back(i, j);
    }
    std::vector<char> keep(candidates.size(), 0);
    parallel_for(candidates.size(), [&](std::size_t k) {
        const auto [i, j] = candidates[k];
        try {
            const double d = distance(m, frames[static_cast<std::size_t>(i)].point, frames[static_cast<std::size_t>(j)].point, opt);
            keep[k] = d < 2.0 * delta ? 1 : 0;
        } catch (const ConvergenceError&) {
        } catch (const RegionError&) {
        }
    });
    std::vector<Edge> edges;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (keep[k]) edges.push_back(candidates[k]);
    }
    return edges;
}

BallAtlas make_atlas(const ChartMetric& m, std::vector<Frame> frames, double delta, const LogOptions& opt) {
    if (frames.empty() || !(delta > 0.0)) throw PreconditionError("make_atlas: need frames and delta > 0");
    BallAtlas atlas{std::move(frames), delta, {}};
    atlas.edges = overlap_edges(m, atlas.frames, delta, opt);
    return atlas;
}

void validate_atlas(const ChartMetric& m, const BallAtlas& atlas, const InjectivityOptions& inj) {
    const auto& fr = atlas.frames;
    for (std::size_t i = 0; i < fr.size(); ++i) {
        if (orthonormality_error(m, fr[i]) > 1e-8) throw PreconditionError("atlas frame " + std::to_string(i) + " is not orthonormal");
        for (std::size_t j = 0; j < i; ++j) {
            if ((fr[i].point - fr[j].point).norm() == 0.0) throw PreconditionError("atlas base points must be distinct");
        }
    }
    for (const auto& [i, j] : atlas.edges) {
        if (!(0 <= i && i < j && j < atlas.size())) throw PreconditionError("atlas edges must satisfy 0 <= i < j < m");
    }
    for (std::size_t i = 0; i < fr.size(); ++i) {
        const double floor = injectivity_radius_floor(m, fr[i].point, 2.0 * atlas.delta, inj);
        if (!(atlas.delta < floor)) {
            throw PreconditionError("atlas radius exceeds the injectivity floor at frame " + std::to_string(i));
        }
    }
}

namespace {

void require_frame(const ChartMetric& m, const Frame& beta, const InvariantOptions& opt, int n) {
    if (beta.dim() != m.dim() || beta.basis.rows() != m.dim() || beta.basis.cols() != m.dim()) {
        throw DimensionError("frame dimension does not match the metric");
    }
    if (n < 0 || n > opt.max_degree) throw PreconditionError("invariant degree outside [0, max_degree]");
    if (orthonormality_error(m, beta) > opt.frame_tolerance) throw PreconditionError("frame is not orthonormal");
}

}  // namespace

JetMatrix s_invariant_matrix(const ChartMetric& m, const Frame& beta, int n, const InvariantOptions& opt) {
    require_frame(m, beta, opt, n);
    const int d = m.dim();
    const JetMap e = exp_jet(m, beta.point, Vec::Zero(d), beta.basis, n + 1, opt.ode);
    const JetMatrix de = jacobian(e);
    const JetMatrix g = metric_along(m, e, n);
    JetMatrix s = de.transpose() * g * de;
    // symmetrize away rounding
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            Jet avg = s(i, j) + s(j, i);
            avg *= 0.5;
            s(i, j) = avg;
            s(j, i) = std::move(avg);
        }
    }
    return s;
}

Jet pack_symmetric(const JetMatrix& s) {
    std::vector<Jet> entries;
    for (int i = 0; i < s.rows(); ++i) {
        for (int j = i; j < s.cols(); ++j) entries.push_back(s(i, j));
    }
    return Jet::stack(entries);
}

JetMatrix unpack_symmetric(const Jet& packed, int dim) {
    if (packed.value_dim() != dim * (dim + 1) / 2) throw DimensionError("packed symmetric jet has the wrong size");
    JetMatrix s(dim, dim, packed.dim_in(), packed.degree());
    int c = 0;
    for (int i = 0; i < dim; ++i) {
        for (int j = i; j < dim; ++j, ++c) {
            s(i, j) = packed.component(c);
            s(j, i) = s(i, j);
        }
    }
    return s;
}

Jet s_invariant(const ChartMetric& m, const Frame& beta, int n, const InvariantOptions& opt) {
    return pack_symmetric(s_invariant_matrix(m, beta, n, opt));
}

JetMap t_invariant(const ChartMetric& m, const Frame& beta1, const Frame& beta2, int n, const InvariantOptions& opt) {
    require_frame(m, beta1, opt, n);
    require_frame(m, beta2, opt, n);
    const int d = m.dim();
    Vec v;
    try {
        v = log_map(m, beta1.point, beta2.point, opt.log);
    } catch (const ConvergenceError&) {
        throw PreconditionError("t_invariant: base points too far apart for the normal chart");
    }
    // y0 = L1^{-1} log_p1(p2)
    const Vec y0 = beta1.from_tangent(m.value(beta1.point), v);
    // jet of exp o L1 about y0, recentred at its value (= p2 up to shooting tolerance)
    const JetMap around = exp_jet(m, beta1.point, beta1.to_tangent(y0), beta1.basis, n, opt.ode);
    const JetMap inv = invert(around.centered(), opt.max_condition);
    const JetMap e2 = exp_jet(m, beta2.point, Vec::Zero(d), beta2.basis, n, opt.ode);
    JetMap t = compose(inv, e2.centered());
    for (int i = 0; i < d; ++i) t[i] += y0(i);
    return t;
}

JetSignature signature(const ChartMetric& m, const BallAtlas& atlas, int n, const InvariantOptions& opt) {
    JetSignature sig;
    sig.degree = n;
    sig.edges = atlas.edges;
    const std::size_t ns = atlas.frames.size();
    sig.s_jets.resize(ns);
    sig.t_jets.resize(atlas.edges.size());
    parallel_for(ns + atlas.edges.size(), [&](std::size_t k) {
        if (k < ns) {
            sig.s_jets[k] = s_invariant(m, atlas.frames[k], n, opt);
        } else {
            const auto [i, j] = atlas.edges[k - ns];
            sig.t_jets[k - ns] = t_invariant(m, atlas.frames[static_cast<std::size_t>(i)], atlas.frames[static_cast<std::size_t>(j)], n, opt);
        }
    });
    return sig;
}

namespace {

void consider(SignatureGap& best, const Jet& a, const Jet& b, const char* kind, int index) {
    if (!a.same_shape(b)) throw DimensionError("signatures have different jet shapes");
    const JetLayout& lay = a.layout();
    for (std::size_t r = 0; r < lay.size(); ++r) {
        for (int c = 0; c < a.value_dim(); ++c) {
            const double gap = std::abs(a.coeff(r, c) - b.coeff(r, c));
            if (gap > best.gap || best.index < 0 || std::isnan(gap)) {
                best.gap = std::isnan(gap) ? INFINITY : gap;
                best.kind = kind;
                best.index = index;
                best.component = c;
                best.alpha = lay.index(r);
            }
        }
    }
}

}  // namespace

SignatureGap worst_gap(const JetSignature& a, const JetSignature& b) {
    if (a.s_jets.size() != b.s_jets.size() || a.t_jets.size() != b.t_jets.size() || a.edges != b.edges) {
        throw DimensionError("signatures have different frame counts or edge sets");
    }
    SignatureGap best;
    for (std::size_t i = 0; i < a.s_jets.size(); ++i) consider(best, a.s_jets[i], b.s_jets[i], "s", static_cast<int>(i));
    for (std::size_t e = 0; e < a.t_jets.size(); ++e) {
        if (a.t_jets[e].size() != b.t_jets[e].size()) throw DimensionError("t-jets have different sizes");
        for (int c = 0; c < a.t_jets[e].size(); ++c) {
            SignatureGap local;
            consider(local, a.t_jets[e][c], b.t_jets[e][c], "t", static_cast<int>(e));
            local.component = c;
            if (local.gap > best.gap || best.index < 0) best = local;
        }
    }
    return best;
}

double signature_distance(const JetSignature& a, const JetSignature& b) { return worst_gap(a, b).gap; }

Vec flatten(const JetSignature& sig) {
    std::vector<double> out;
    for (const auto& s : sig.s_jets) {
        const auto c = s.coefficients();
        out.insert(out.end(), c.begin(), c.end());
    }
    for (const auto& t : sig.t_jets) {
        for (const auto& comp : t.components()) {
            const auto c = comp.coefficients();
            out.insert(out.end(), c.begin(), c.end());
        }
    }
    return Eigen::Map<Vec>(out.data(), static_cast<Eigen::Index>(out.size()));
}

nlohmann::json to_json(const JetSignature& sig) {
    nlohmann::json j;
    j["degree"] = sig.degree;
    j["s_jets"] = nlohmann::json::array();
    for (const auto& s : sig.s_jets) j["s_jets"].push_back(to_json(s));
    j["t_jets"] = nlohmann::json::array();
    for (std::size_t e = 0; e < sig.t_jets.size(); ++e) {
        j["t_jets"].push_back({{"edge", {sig.edges[e].first, sig.edges[e].second}}, {"jet", to_json(sig.t_jets[e])}});
    }
    return j;
}

}  // namespace isojet
