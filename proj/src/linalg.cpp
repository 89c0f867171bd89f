#include "isojet/linalg.hpp"

#include <cmath>
#include <limits>

#include "isojet/error.hpp"

namespace isojet {

Mat spd_sqrt(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
    if (es.eigenvalues().minCoeff() <= 0.0) throw SingularError("matrix is not positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Mat spd_inverse_sqrt(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
    if (es.eigenvalues().minCoeff() <= 0.0) throw SingularError("matrix is not positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

Mat polar_orthogonal(const Mat& a) {
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

double condition_number(const Mat& a) {
    Eigen::JacobiSVD<Mat> svd(a);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

double min_eigenvalue(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Mat cayley(const Mat& skew) {
    const Mat id = Mat::Identity(skew.rows(), skew.cols());
    return (id - skew).partialPivLu().solve(id + skew);
}

Mat skew_from_params(const double* params, int dim) {
    Mat s = Mat::Zero(dim, dim);
    int k = 0;
    for (int i = 0; i < dim; ++i) {
        for (int j = i + 1; j < dim; ++j) {
            s(i, j) = params[k];
            s(j, i) = -params[k];
            ++k;
        }
    }
    return s;
}

}  // namespace isojet
