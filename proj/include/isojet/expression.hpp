#pragma once

// Small arithmetic expressions for defining functions rho(z, t) on C^d.
//
// Grammar: + - * / ^, parentheses, |f| (modulus; |f|^2 is exact), numbers,
// the constants pi and i, functions Re Im conj exp log sqrt sin cos.
// Variables: z1..zd (complex), x1..xd and y1..yd (real and imaginary parts),
// t; with d = 1 also z, x, y. |z| is the Euclidean norm of (z1..zd).
// log, sqrt, sin, cos and non-integer powers take real arguments.
//
// Evaluation variables are ordered x1, y1, x2, y2, ..., xd, yd, t.

#include <complex>
#include <memory>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "isojet/error.hpp"
#include "isojet/jets.hpp"

namespace isojet {

enum class ExprOp { constant, variable, add, sub, mul, div, neg, pow_int, pow_real, exp, log, sqrt, sin, cos, re, im, conj, abs2 };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    ExprOp op = ExprOp::constant;
    std::complex<double> value{};  // constant
    int var = -1;                  // variable
    double power = 0.0;            // pow_int, pow_real
    bool real = true;              // imaginary part is identically zero
    ExprPtr a;
    ExprPtr b;
};

class Expression {
public:
    Expression() = default;

    /// Throws ParseError naming the offending position.
    static Expression parse(const std::string& text, int complex_dim);

    int complex_dim() const { return dim_; }
    int variable_count() const { return 2 * dim_ + 1; }
    const std::string& text() const { return text_; }
    bool empty() const { return root_ == nullptr; }

    /// Real part of the value; throws PreconditionError when the imaginary
    /// part is not negligible.
    double operator()(std::span<const double> vars) const;

    /// Real part, for S = double or Jet. All variables must share one jet shape.
    template <class S>
    S evaluate(std::span<const S> vars) const;

    /// d/d(variable k), simplified.
    Expression derivative(int var) const;

    /// Replaces the real coordinates u = (x1, y1, ..., xd, yd) by a u + b; t is unchanged.
    Expression substitute(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) const;

    /// True for the literal constant 0 (after simplification).
    bool is_zero() const;

    std::string to_string() const;

private:
    Expression(ExprPtr root, int dim, std::string text) : root_(std::move(root)), dim_(dim), text_(std::move(text)) {}

    ExprPtr root_;
    int dim_ = 0;
    std::string text_;
};

}  // namespace isojet
