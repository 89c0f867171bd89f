#pragma once

// Tracking an isometry family t -> F_t between two metric families by
// matching jet signatures of frames, and a numerical smoothness diagnostic
// of the result.

#include <string>
#include <vector>

#include "json.hpp"

#include "isojet/invariants.hpp"
#include "isojet/isometry.hpp"

namespace isojet {

/// Frames at fixed base points, obtained by orthonormalizing fixed seeds
/// against g_t (so they vary smoothly with t).
struct FrameSection {
    std::vector<Vec> points;
    std::vector<Mat> seeds;

    int size() const { return static_cast<int>(points.size()); }
    std::vector<Frame> at(const ChartMetric& g) const;
    /// Coordinate seeds at the given points.
    static FrameSection standard(std::vector<Vec> points);
};

struct TrackerOptions {
    int degree = 3;
    /// Ball radius used to build the edge set at the seed parameter.
    double delta = 0.3;
    /// Least-squares stopping rules.
    double residual_tolerance = 1e-11;
    double gradient_tolerance = 1e-13;
    double step_tolerance = 1e-13;
    int max_iterations = 30;
    /// Nodes whose final residual exceeds this are not accepted.
    double accept_residual = 1e-7;
    /// Central-difference step for Jacobians with respect to frame parameters.
    double jacobian_step = 1e-5;
    int max_halvings = 4;
    /// Singular values above rank_threshold * sigma_max count toward the rank.
    double rank_threshold = 1e-6;
    /// Smoothness diagnostic: flag increments whose rate exceeds
    /// jump_threshold times max(median rate, rate_floor).
    double jump_threshold = 10.0;
    double rate_floor = 1e-3;
    InvariantOptions invariants;
    PropagationOptions propagation;
};

/// Signature of the source family at gamma(t) over the fixed edge set.
JetSignature target_signature_H(const MetricFamily& g, const FrameSection& gamma, const std::vector<Edge>& edges,
                                double t, int n, const InvariantOptions& opt = {});

struct FrameFit {
    std::vector<Frame> frames;
    double residual = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Frames of g_hat(t) whose signature matches `target`, by Levenberg-Marquardt
/// over base points and Cayley coordinates of the orthogonal factor relative to
/// the guess. `converged` means residual <= accept_residual.
FrameFit solve_frames(const MetricFamily& g_hat, double t, const JetSignature& target, const std::vector<Frame>& guess,
                      const TrackerOptions& opt = {});

struct RankReport {
    int rank = 0;
    int parameter_count = 0;
    std::vector<double> singular_values;
};

/// Numerical rank of the differential of the signature of g(t) with respect
/// to the frame parameters at gamma(t).
RankReport rank_probe(const MetricFamily& g, double t, const FrameSection& gamma, const std::vector<Edge>& edges, int n,
                      const TrackerOptions& opt = {});

struct TrackNode {
    double t = 0.0;
    bool accepted = false;
    std::vector<Frame> frames;
    /// (F_t(p_1), dF_t at p_1)
    OneJet jet;
    double residual = 0.0;
    int iterations = 0;
    std::vector<std::string> flags;
};

struct TrackRecord {
    std::vector<TrackNode> nodes;  // sorted by t
    std::vector<Edge> edges;
    int degree = 0;
    /// Why a branch stopped early, if it did.
    std::vector<std::string> notes;

    std::vector<const TrackNode*> accepted() const;
};

/// Marches outward from t0 over `grid` (which must contain t0) in both
/// directions, solving frames at each node seeded by the previous node.
/// Failed steps are retried with up to max_halvings halvings of the
/// parameter step; a node that still fails is flagged and ends its branch.
/// `seed` is the 1-jet at gamma.points[0] for t0.
TrackRecord track(const MetricFamily& g, const MetricFamily& g_hat, const FrameSection& gamma, const OneJet& seed,
                  double t0, std::vector<double> grid, const TrackerOptions& opt = {});

/// Node-wise union of records over disjoint parameter sets, sorted by t.
TrackRecord merge_records(const TrackRecord& a, const TrackRecord& b);

struct SmoothnessReport {
    std::vector<double> t;
    /// Per accepted node: d/dt and d^2/dt^2 of (image point, linear part entries row-major).
    std::vector<Vec> first;
    std::vector<Vec> second;
    /// Per increment k (between accepted nodes k-1 and k): jump score; entry 0 is 0.
    std::vector<double> jump_score;
    /// Parameters of flagged nodes (the later node of each flagged increment).
    std::vector<double> flagged;
    double max_image_rate = 0.0;
    double max_linear_rate = 0.0;
};

/// Requires at least 5 accepted nodes. Derivatives use 5-point finite
/// differences on the (possibly nonuniform) accepted grid.
SmoothnessReport smoothness_diagnostic(const TrackRecord& rec, const TrackerOptions& opt = {});

nlohmann::json to_json(const TrackRecord& rec);
nlohmann::json to_json(const SmoothnessReport& rep);
/// Header t, q_1..q_d, D_11..D_dd (row-major), residual, flags.
std::string to_csv(const TrackRecord& rec);

}  // namespace isojet
