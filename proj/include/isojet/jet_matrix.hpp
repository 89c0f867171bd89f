#pragma once

#include <vector>

#include "isojet/jets.hpp"
#include "isojet/linalg.hpp"

namespace isojet {

/// Dense matrix whose entries are scalar jets of one shape.
class JetMatrix {
public:
    JetMatrix() = default;
    JetMatrix(int rows, int cols, int dim_in, int degree);

    static JetMatrix constant(const Mat& m, int dim_in, int degree);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int dim_in() const { return e_.front().dim_in(); }
    int degree() const { return e_.front().degree(); }

    Jet& operator()(int i, int j) { return e_[static_cast<std::size_t>(i * cols_ + j)]; }
    const Jet& operator()(int i, int j) const { return e_[static_cast<std::size_t>(i * cols_ + j)]; }

    /// Entry-wise constant terms.
    Mat constant_term() const;

    JetMatrix transpose() const;
    JetMatrix& operator+=(const JetMatrix& other);
    JetMatrix& operator*=(double s);
    friend JetMatrix operator*(const JetMatrix& a, const JetMatrix& b);
    friend JetMatrix operator+(JetMatrix a, const JetMatrix& b) { return a += b; }

    /// Inverse of a square jet matrix with invertible constant term.
    JetMatrix inverse() const;

    JetMatrix truncated(int n) const;
    JetMatrix derivative(int var) const;
    /// Entry-wise sum_alpha m_alpha p^alpha.
    JetMatrix apply(const MonomialPowers& powers) const;

    /// Largest absolute coefficient difference.
    double max_abs_difference(const JetMatrix& other) const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<Jet> e_;
};

/// Jacobian jets d f_i / d x_j of a jet map (degree drops by one).
JetMatrix jacobian(const JetMap& f);

}  // namespace isojet
