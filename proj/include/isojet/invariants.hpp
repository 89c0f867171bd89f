#pragma once

// Jet invariants of frames: S, the metric in normal coordinates, and T, the
// transition map between two normal charts, assembled over a ball atlas.

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "isojet/frame.hpp"
#include "isojet/geodesic.hpp"
#include "isojet/jet_matrix.hpp"
#include "isojet/jets.hpp"

namespace isojet {

using Edge = std::pair<int, int>;

struct InvariantOptions {
    int max_degree = 5;
    /// Frames whose Gram matrix deviates from I by more than this are rejected.
    double frame_tolerance = 1e-8;
    /// Condition bound for inverting the jet of exp at the first frame.
    double max_condition = 1e8;
    OdeOptions ode;
    LogOptions log;
};

/// Frames with pairwise distinct base points, a common ball radius, and the
/// edges (i < j) whose balls overlap.
struct BallAtlas {
    std::vector<Frame> frames;
    double delta = 0.0;
    std::vector<Edge> edges;

    int size() const { return static_cast<int>(frames.size()); }
};

/// Edges from dist(p_i, p_j) < 2 delta with dist from log_map; pairs whose
/// shooting fails are treated as far apart.
std::vector<Edge> overlap_edges(const ChartMetric& m, const std::vector<Frame>& frames, double delta,
                                const LogOptions& opt = {});

BallAtlas make_atlas(const ChartMetric& m, std::vector<Frame> frames, double delta, const LogOptions& opt = {});

/// Checks distinct base points, orthonormal frames, i < j edges, and
/// delta < injectivity floor at every base point. Throws PreconditionError.
void validate_atlas(const ChartMetric& m, const BallAtlas& atlas, const InjectivityOptions& inj = {});

/// S = (exp_p o L_beta)^* g as a jet at 0 of degree n, as a matrix.
JetMatrix s_invariant_matrix(const ChartMetric& m, const Frame& beta, int n, const InvariantOptions& opt = {});

/// Upper-triangle packing (row-major, i <= j) of s_invariant_matrix.
Jet s_invariant(const ChartMetric& m, const Frame& beta, int n, const InvariantOptions& opt = {});

/// T = (exp o L_beta1)^{-1} o (exp o L_beta2) as a jet at 0 of degree n.
JetMap t_invariant(const ChartMetric& m, const Frame& beta1, const Frame& beta2, int n,
                   const InvariantOptions& opt = {});

Jet pack_symmetric(const JetMatrix& s);
JetMatrix unpack_symmetric(const Jet& packed, int dim);

struct JetSignature {
    int degree = 0;
    std::vector<Jet> s_jets;
    std::vector<JetMap> t_jets;
    std::vector<Edge> edges;
};

JetSignature signature(const ChartMetric& m, const BallAtlas& atlas, int n, const InvariantOptions& opt = {});

/// Where two signatures differ most.
struct SignatureGap {
    double gap = 0.0;
    /// "s" or "t"
    std::string kind;
    /// Frame index for "s", edge index for "t".
    int index = -1;
    /// Output component (packed entry for "s", coordinate for "t").
    int component = 0;
    MultiIndex alpha;
};

/// Largest coefficientwise gap. Throws DimensionError when the signatures
/// have different shapes or edge sets.
SignatureGap worst_gap(const JetSignature& a, const JetSignature& b);

/// max coefficientwise |a - b|
double signature_distance(const JetSignature& a, const JetSignature& b);

/// Every coefficient, s-jets first, then t-jets, in storage order.
Vec flatten(const JetSignature& sig);

nlohmann::json to_json(const JetSignature& sig);

}  // namespace isojet
