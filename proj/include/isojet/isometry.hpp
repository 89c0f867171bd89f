#pragma once

// Isometries between chart metrics: atlas comparison through jet
// signatures, the local maps built from frame pairs, and reconstruction of a
// global isometry from a 1-jet by propagation along paths.

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isojet/invariants.hpp"

namespace isojet {

/// Value and differential of a candidate isometry at one point.
struct OneJet {
    Vec source;
    Vec image;
    /// d F at source, mapping g(source)-orthonormal to g_hat(image)-orthonormal bases.
    Mat linear;
};

/// max |D^T g_hat(q) D - g(p)|
double one_jet_defect(const ChartMetric& g, const ChartMetric& g_hat, const OneJet& j);

struct AtlasVerdict {
    bool match = false;
    /// Empty on match; otherwise why the atlases differ.
    std::string reason;
    SignatureGap witness;
};

/// Compares the signatures of two atlases of equal size. Edge sets are
/// compared first; a differing edge set is a mismatch without witness.
AtlasVerdict check_atlas_isometry(const ChartMetric& g, const ChartMetric& g_hat, const BallAtlas& a,
                                  const BallAtlas& a_hat, int n, double tol, const InvariantOptions& opt = {});

/// The maps f_i = (exp o L_hat_i) o (exp o L_i)^{-1} on the balls of an atlas.
struct LocalIsometry {
    MetricPtr g;
    MetricPtr g_hat;
    std::vector<Frame> source;
    std::vector<Frame> target;
    double delta = 0.0;
    std::vector<Edge> edges;
};

LocalIsometry make_local_isometry(MetricPtr g, MetricPtr g_hat, const BallAtlas& a, const BallAtlas& a_hat);

/// f_i(x). Throws PreconditionError when x is not in the delta-ball of p_i.
Vec local_map_eval(const LocalIsometry& l, int i, const Vec& x, const LogOptions& opt = {});

/// Largest |f_i(x) - f_j(x)| over `samples` points drawn (deterministically)
/// from the overlaps of edge balls, spread evenly over the edges.
double overlap_discrepancy(const LocalIsometry& l, int samples, const LogOptions& opt = {});

/// |exp^{g_hat}_q(D v) - F(exp^g_p(v))|
double efp_residual(const ChartMetric& g, const ChartMetric& g_hat, const OneJet& j, const Vec& v,
                    const std::function<Vec(const Vec&)>& candidate, const OdeOptions& opt = {});

struct PropagationOptions {
    /// Largest g-distance between consecutive path nodes after refinement.
    double step = 0.1;
    /// Largest allowed distance of D from the (g, g_hat)-orthogonal set before re-projection.
    double drift_tolerance = 1e-6;
    LogOptions log;
    OdeOptions ode;
};

/// Subdivides each polyline segment uniformly until consecutive nodes are
/// closer than `step` in the metric.
std::vector<Vec> refine_path(const ChartMetric& g, const std::vector<Vec>& path, double step, const LogOptions& opt = {});

/// Transports j0 along the refined path: image by exp_{q_k}(D_k log_{p_k} p_{k+1}),
/// differential by the chain rule through the variational equations, then
/// polar re-orthonormalization. Returns one OneJet per refined node, starting with j0.
/// path.front() must equal j0.source.
std::vector<OneJet> propagate_one_jet(const ChartMetric& g, const ChartMetric& g_hat, const OneJet& j0,
                                      const std::vector<Vec>& path, const PropagationOptions& opt = {});

/// Image of x under the isometry with 1-jet j0 at base, propagated along the chart segment.
Vec evaluate_global(const ChartMetric& g, const ChartMetric& g_hat, const OneJet& j0, const Vec& x,
                    const PropagationOptions& opt = {});

nlohmann::json to_json(const OneJet& j);
nlohmann::json to_json(const AtlasVerdict& v);

}  // namespace isojet
