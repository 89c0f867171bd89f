#include "isojet/frame.hpp"

#include <cmath>

namespace isojet {

Frame orthonormal_frame(const ChartMetric& m, const Vec& p, const Mat& seed) {
    const int d = m.dim();
    if (p.size() != d || seed.rows() != d || seed.cols() != d) throw DimensionError("orthonormal_frame: shape mismatch");
    m.require_inside(p, "orthonormal_frame");
    const Mat g = m.value(p);
    Mat b = seed;
    const double scale = std::max(1.0, seed.cwiseAbs().maxCoeff());
    for (int j = 0; j < d; ++j) {
        Vec v = b.col(j);
        const double before = std::sqrt(v.dot(g * v));
        // two passes of modified Gram-Schmidt keep the Gram matrix at rounding level
        for (int pass = 0; pass < 2; ++pass) {
            for (int k = 0; k < j; ++k) v -= b.col(k).dot(g * v) * b.col(k);
        }
        const double n = std::sqrt(v.dot(g * v));
        if (!(n > 1e-12 * std::max(before, 1e-300)) || !(before > 1e-14 * scale)) {
            throw PreconditionError("orthonormal_frame: seed vectors are linearly dependent");
        }
        b.col(j) = v / n;
    }
    return {p, b};
}

Frame standard_frame(const ChartMetric& m, const Vec& p) {
    return orthonormal_frame(m, p, Mat::Identity(m.dim(), m.dim()));
}

double orthonormality_error(const ChartMetric& m, const Frame& f) {
    const Mat gram = f.basis.transpose() * m.value(f.point) * f.basis;
    return (gram - Mat::Identity(f.dim(), f.dim())).cwiseAbs().maxCoeff();
}

}  // namespace isojet
