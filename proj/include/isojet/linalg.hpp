#pragma once

#include <Eigen/Dense>

namespace isojet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Symmetric square root of an SPD matrix.
Mat spd_sqrt(const Mat& a);
Mat spd_inverse_sqrt(const Mat& a);

/// Orthogonal factor of the polar decomposition.
Mat polar_orthogonal(const Mat& a);

/// Ratio of extreme singular values (infinity for singular input).
double condition_number(const Mat& a);

/// Smallest eigenvalue of the symmetric part.
double min_eigenvalue(const Mat& a);

/// Cayley map (I - A)^{-1}(I + A) for skew A.
Mat cayley(const Mat& skew);

/// Skew matrix from its strictly-upper entries, row by row.
Mat skew_from_params(const double* params, int dim);

}  // namespace isojet
