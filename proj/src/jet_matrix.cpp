#include "isojet/jet_matrix.hpp"

#include <algorithm>

#include "isojet/error.hpp"

namespace isojet {

JetMatrix::JetMatrix(int rows, int cols, int dim_in, int degree) : rows_(rows), cols_(cols) {
    e_.assign(static_cast<std::size_t>(rows * cols), Jet(dim_in, degree));
}

JetMatrix JetMatrix::constant(const Mat& m, int dim_in, int degree) {
    JetMatrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()), dim_in, degree);
    for (int i = 0; i < out.rows_; ++i) {
        for (int j = 0; j < out.cols_; ++j) out(i, j).coeff(0) = m(i, j);
    }
    return out;
}

Mat JetMatrix::constant_term() const {
    Mat m(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
        for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).value();
    }
    return m;
}

JetMatrix JetMatrix::transpose() const {
    JetMatrix out;
    out.rows_ = cols_;
    out.cols_ = rows_;
    out.e_.resize(e_.size());
    for (int i = 0; i < rows_; ++i) {
        for (int j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    }
    return out;
}

JetMatrix& JetMatrix::operator+=(const JetMatrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionError("jet matrix sizes differ");
    for (std::size_t k = 0; k < e_.size(); ++k) e_[k] += other.e_[k];
    return *this;
}

JetMatrix& JetMatrix::operator*=(double s) {
    for (Jet& j : e_) j *= s;
    return *this;
}

JetMatrix operator*(const JetMatrix& a, const JetMatrix& b) {
    if (a.cols_ != b.rows_) throw DimensionError("jet matrix product: inner sizes differ");
    JetMatrix out(a.rows_, b.cols_, a.dim_in(), a.degree());
    for (int i = 0; i < a.rows_; ++i) {
        for (int j = 0; j < b.cols_; ++j) {
            Jet& acc = out(i, j);
            for (int k = 0; k < a.cols_; ++k) acc += a(i, k) * b(k, j);
        }
    }
    return out;
}

JetMatrix JetMatrix::inverse() const {
    if (rows_ != cols_) throw DimensionError("only square jet matrices can be inverted");
    const Mat m0 = constant_term();
    Eigen::FullPivLU<Mat> lu(m0);
    if (!lu.isInvertible()) throw SingularError("jet matrix has a singular constant term");
    const Mat inv0 = lu.inverse();
    const int d = dim_in();
    const int n = degree();
    // (M0 + N)^{-1} = sum_k (-M0^{-1} N)^k M0^{-1}, N nilpotent of order n + 1
    JetMatrix nil = *this;
    for (Jet& j : nil.e_) j.coeff(0) = 0.0;
    JetMatrix step = JetMatrix::constant(-inv0, d, n) * nil;
    JetMatrix base = JetMatrix::constant(inv0, d, n);
    JetMatrix term = base;
    JetMatrix sum = base;
    for (int k = 1; k <= n; ++k) {
        term = step * term;
        sum += term;
    }
    return sum;
}

JetMatrix JetMatrix::truncated(int n) const {
    JetMatrix out = *this;
    for (Jet& j : out.e_) j = truncate(j, n);
    return out;
}

JetMatrix JetMatrix::derivative(int var) const {
    JetMatrix out = *this;
    for (Jet& j : out.e_) j = isojet::derivative(j, var);
    return out;
}

JetMatrix JetMatrix::apply(const MonomialPowers& powers) const {
    JetMatrix out = *this;
    for (Jet& j : out.e_) j = powers.apply(j);
    return out;
}

double JetMatrix::max_abs_difference(const JetMatrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionError("jet matrix sizes differ");
    double m = 0.0;
    for (std::size_t k = 0; k < e_.size(); ++k) m = std::max(m, isojet::max_abs_difference(e_[k], other.e_[k]));
    return m;
}

JetMatrix jacobian(const JetMap& f) {
    const int n = std::max(0, f.degree() - 1);
    JetMatrix out(f.size(), f.dim_in(), f.dim_in(), n);
    for (int i = 0; i < f.size(); ++i) {
        for (int j = 0; j < f.dim_in(); ++j) out(i, j) = derivative(f[i], j);
    }
    return out;
}

}  // namespace isojet
