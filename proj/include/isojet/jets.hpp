#pragma once

// Truncated multivariate power series ("jets") with real vector coefficients.
//
// A Jet of input dimension d and degree N stores the Taylor coefficients
// c_alpha of a map R^d -> R^V for every multi-index |alpha| <= N. Storage is
// dense and ordered graded-lexicographically: lower total order first, and
// within one order the larger leading exponent first (x^2, xy, y^2).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace isojet {

class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> exponents);
    MultiIndex(std::initializer_list<int> exponents);

    int size() const { return static_cast<int>(exps_.size()); }
    int operator[](int i) const { return exps_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& exponents() const { return exps_; }

    /// Total order |alpha|.
    int order() const;

    /// Graded-lex comparison (see file comment).
    std::strong_ordering operator<=>(const MultiIndex& other) const;
    bool operator==(const MultiIndex& other) const = default;

    std::string to_string() const;

private:
    std::vector<int> exps_;
};

/// Shared monomial bookkeeping for one (dimension, degree) pair.
class JetLayout {
public:
    struct Product {
        std::uint32_t lhs;
        std::uint32_t rhs;
        std::uint32_t out;
    };

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    /// Cached, thread-safe lookup. dim >= 1, degree >= 0.
    static std::shared_ptr<const JetLayout> get(int dim, int degree);

    int dim() const { return dim_; }
    int degree() const { return degree_; }
    std::size_t size() const { return indices_.size(); }

    const MultiIndex& index(std::size_t rank) const { return indices_[rank]; }
    int order(std::size_t rank) const { return orders_[rank]; }

    /// Rank of alpha; throws DimensionError if alpha does not fit the layout.
    std::size_t rank(const MultiIndex& alpha) const;

    /// First rank of total order k; degree_begin(degree()+1) == size().
    std::size_t degree_begin(int k) const { return begins_[static_cast<std::size_t>(k)]; }

    /// Rank of alpha + e_var, or npos when that exceeds the degree.
    std::size_t raise(std::size_t rank, int var) const {
        return raise_[rank * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(var)];
    }

    /// Rank of alpha - e_var, or npos when alpha_var == 0.
    std::size_t lower(std::size_t rank, int var) const {
        return lower_[rank * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(var)];
    }

    /// Every pair of ranks whose product survives truncation.
    std::span<const Product> products() const { return products_; }

    JetLayout(int dim, int degree);

private:
    std::uint64_t key(const std::vector<int>& exps) const;

    int dim_;
    int degree_;
    std::vector<MultiIndex> indices_;
    std::vector<int> orders_;
    std::vector<std::size_t> begins_;
    std::vector<std::size_t> raise_;
    std::vector<std::size_t> lower_;
    std::vector<Product> products_;
    std::vector<std::pair<std::uint64_t, std::size_t>> lookup_;  // sorted by key
};

class Jet {
public:
    Jet() = default;
    Jet(int dim_in, int degree, int value_dim = 1);

    static Jet constant(int dim_in, int degree, double value);
    /// The coordinate function center + x_var.
    static Jet variable(int dim_in, int degree, int var, double center = 0.0);
    /// Dense coefficients in layout order, value components innermost.
    static Jet from_coefficients(int dim_in, int degree, int value_dim, std::vector<double> coeffs);

    int dim_in() const { return layout_->dim(); }
    int degree() const { return layout_->degree(); }
    int value_dim() const { return value_dim_; }
    bool empty() const { return layout_ == nullptr; }
    const JetLayout& layout() const { return *layout_; }
    const std::shared_ptr<const JetLayout>& layout_ptr() const { return layout_; }
    std::size_t num_monomials() const { return layout_->size(); }

    std::span<const double> coefficients() const { return c_; }
    std::span<double> coefficients() { return c_; }

    double coeff(std::size_t rank, int comp = 0) const { return c_[rank * stride() + comp]; }
    double& coeff(std::size_t rank, int comp = 0) { return c_[rank * stride() + comp]; }
    double coeff(const MultiIndex& alpha, int comp = 0) const;
    void set(const MultiIndex& alpha, int comp, double value);

    /// Constant term of a scalar jet.
    double value() const { return c_[0]; }

    Jet component(int comp) const;
    static Jet stack(std::span<const Jet> scalars);

    Jet& operator+=(const Jet& other);
    Jet& operator-=(const Jet& other);
    Jet& operator*=(double s);
    Jet& operator/=(double s);
    Jet& operator+=(double s);  // scalar jets only
    Jet& operator-=(double s);
    /// this += s * other
    Jet& add_scaled(const Jet& other, double s);

    Jet operator-() const;

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator*(Jet a, double s) { return a *= s; }
    friend Jet operator*(double s, Jet a) { return a *= s; }
    friend Jet operator/(Jet a, double s) { return a /= s; }
    friend Jet operator+(Jet a, double s) { return a += s; }
    friend Jet operator+(double s, Jet a) { return a += s; }
    friend Jet operator-(Jet a, double s) { return a -= s; }
    friend Jet operator-(double s, const Jet& a) { return (-a) += s; }

    /// Truncated Cauchy product; at least one operand must be scalar-valued.
    friend Jet operator*(const Jet& a, const Jet& b);

    bool same_shape(const Jet& other) const;

private:
    std::size_t stride() const { return static_cast<std::size_t>(value_dim_); }
    void require_same_shape(const Jet& other, const char* what) const;

    std::shared_ptr<const JetLayout> layout_;
    int value_dim_ = 1;
    std::vector<double> c_;
};

enum class JetOp { add, mul, scale };

/// Ring operations on truncated series; `s` is used only by JetOp::scale.
Jet jet_arith(const Jet& a, const Jet& b, JetOp op, double s = 1.0);

/// Projection pi_n: drop every coefficient of order > n.
Jet truncate(const Jet& f, int n);

/// Extend to a larger degree with zero coefficients.
Jet extend(const Jet& f, int n);

/// Partial derivative along `var`; the degree drops by one (degree 0 gives the zero jet of degree 0).
Jet derivative(const Jet& f, int var);

/// Evaluate the truncated polynomial at x (component `comp`).
double evaluate(const Jet& f, std::span<const double> x, int comp = 0);

/// max |a_alpha - b_alpha| over all coefficients; shapes must match.
double max_abs_difference(const Jet& a, const Jet& b);

// Elementary functions of scalar jets (Taylor composition at the constant term).
Jet reciprocal(const Jet& x);
Jet operator/(const Jet& a, const Jet& b);
Jet operator/(double s, const Jet& b);
Jet exp(const Jet& x);
Jet log(const Jet& x);
Jet sqrt(const Jet& x);
Jet pow(const Jet& x, double p);
Jet sin(const Jet& x);
Jet cos(const Jet& x);

/// f(c + delta) = sum_k taylor[k] * delta^k with delta = x - c, c the constant term of x.
Jet apply_univariate(const Jet& x, std::span<const double> taylor);

/// A truncated map R^d -> R^e given by e scalar jets of equal shape.
class JetMap {
public:
    JetMap() = default;
    explicit JetMap(std::vector<Jet> components);

    static JetMap identity(int dim, int degree);
    /// x -> offset + A x.
    static JetMap affine(const Eigen::VectorXd& offset, const Eigen::MatrixXd& linear, int degree);

    int size() const { return static_cast<int>(comps_.size()); }
    int dim_in() const { return comps_.front().dim_in(); }
    int degree() const { return comps_.front().degree(); }

    const Jet& operator[](int i) const { return comps_[static_cast<std::size_t>(i)]; }
    Jet& operator[](int i) { return comps_[static_cast<std::size_t>(i)]; }
    const std::vector<Jet>& components() const { return comps_; }

    Eigen::VectorXd constant_term() const;
    /// (i, j) entry is d f_i / d x_j at 0.
    Eigen::MatrixXd linear_part() const;

    /// Same map with the constant term removed.
    JetMap centered() const;

    JetMap& operator+=(const JetMap& other);
    JetMap& operator-=(const JetMap& other);
    friend JetMap operator+(JetMap a, const JetMap& b) { return a += b; }
    friend JetMap operator-(JetMap a, const JetMap& b) { return a -= b; }

private:
    std::vector<Jet> comps_;
};

JetMap truncate(const JetMap& f, int n);
double max_abs_difference(const JetMap& a, const JetMap& b);

/// Linear map applied to a jet map: (A f)_i = sum_j A_ij f_j.
JetMap apply_linear(const Eigen::MatrixXd& a, const JetMap& f);

/// Products g^alpha for all |alpha| <= degree, reusable across many outer series.
class MonomialPowers {
public:
    /// `inner` must have zero constant term.
    MonomialPowers(const JetMap& inner, int degree);

    int outer_dim() const { return layout_->dim(); }
    int degree() const { return layout_->degree(); }

    /// sum_alpha f_alpha g^alpha; f must have input dimension outer_dim().
    Jet apply(const Jet& f) const;

private:
    std::shared_ptr<const JetLayout> layout_;  // outer variables
    std::vector<Jet> powers_;
};

enum class Recenter { no, yes };

/// Truncated f o g. With Recenter::no, g must have zero constant term. With
/// Recenter::yes, f is understood as expanded about g(0) and g - g(0) is used.
Jet compose(const Jet& f, const JetMap& g, Recenter recenter = Recenter::no);
JetMap compose(const JetMap& f, const JetMap& g, Recenter recenter = Recenter::no);

/// Compositional inverse of f with f(0) = 0. Throws SingularError when the
/// linear part has condition number above max_condition.
JetMap invert(const JetMap& f, double max_condition = 1e8);

}  // namespace isojet
