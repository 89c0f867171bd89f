#pragma once

// Orthonormal frames: a base point with an ordered g-orthonormal basis,
// identified with the linear isometry L(x) = basis * x from Euclidean space.

#include "isojet/linalg.hpp"
#include "isojet/metric.hpp"

namespace isojet {

struct Frame {
    Vec point;
    /// Columns are the basis vectors.
    Mat basis;

    int dim() const { return static_cast<int>(point.size()); }
    Vec to_tangent(const Vec& x) const { return basis * x; }
    /// Inverse of to_tangent, using orthonormality: basis^T g(p) v.
    Vec from_tangent(const Mat& g_at_point, const Vec& v) const { return basis.transpose() * g_at_point * v; }
};

/// Gram-Schmidt of the seed columns with respect to g(p), in seed order.
/// Throws PreconditionError for a rank-deficient seed.
Frame orthonormal_frame(const ChartMetric& m, const Vec& p, const Mat& seed);

/// orthonormal_frame with the coordinate basis as seed.
Frame standard_frame(const ChartMetric& m, const Vec& p);

/// max |B^T g(p) B - I|
double orthonormality_error(const ChartMetric& m, const Frame& f);

}  // namespace isojet
