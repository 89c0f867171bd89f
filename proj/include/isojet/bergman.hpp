#pragma once

// Bergman kernels of bounded domains in C^d from orthonormalized monomials,
// the induced Kaehler metrics, and diffeomorphisms that carry a family of
// domains back to a fixed chart.
//
// Real coordinates are interleaved: (x1, y1, ..., xd, yd) with z_k = x_k + i y_k.

#include <complex>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isojet/expression.hpp"
#include "isojet/jets.hpp"
#include "isojet/metric.hpp"

namespace isojet {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// rho(z, t) with its real gradient and Hessian (symbolic, in x and y).
class DefiningFunction {
public:
    explicit DefiningFunction(Expression rho);

    int dim() const { return rho_.complex_dim(); }
    int real_dim() const { return 2 * dim(); }
    const Expression& expression() const { return rho_; }

    double value(const Vec& x, double t) const;
    Vec gradient(const Vec& x, double t) const;
    Mat hessian(const Vec& x, double t) const;
    /// d rho / dt
    double time_derivative(const Vec& x, double t) const;

    Jet value(std::span<const Jet> x, double t) const;
    std::vector<Jet> gradient(std::span<const Jet> x, double t) const;

    /// Complex Hessian d^2 rho / dz_i dzbar_j.
    CMat levi(const Vec& x, double t) const;
    /// (d rho / dz_1, ..., d rho / dz_d)
    CVec dz(const Vec& x, double t) const;

private:
    Expression rho_;
    Expression rho_t_;
    std::vector<Expression> grad_;
    std::vector<std::vector<Expression>> hess_;
};

struct QuadratureConfig {
    enum class Method { automatic, polar, qmc };
    /// automatic: polar for d = 1, qmc otherwise.
    Method method = Method::automatic;
    std::size_t qmc_nodes = std::size_t{1} << 18;
    /// Kronecker offset; the quadrature is a deterministic function of it.
    double qmc_offset = 0.5;
    int radial_nodes = 64;
    int angular_nodes = 256;
};

/// One slice {rho(., t) < 0}.
struct DomainSpec {
    std::shared_ptr<const DefiningFunction> rho;
    double t = 0.0;
    /// Real box containing the closure of the domain.
    Box box;
    /// Interior point; polar quadrature and boundary sampling use rays from it.
    Vec center;
    QuadratureConfig quad;
    std::string name;

    int dim() const { return rho->dim(); }
    double value(const Vec& x) const { return rho->value(x, t); }
    Vec gradient(const Vec& x) const { return rho->gradient(x, t); }
    bool inside(const Vec& x) const { return box.contains(x) && value(x) < 0.0; }
    /// Boundary point on the ray from the center in direction u (first sign change).
    Vec ray_boundary(const Vec& u) const;
};

struct DomainFamily {
    std::shared_ptr<const DefiningFunction> rho;
    double t_min = -1.0;
    double t_max = 1.0;
    Box box;
    Vec center;
    QuadratureConfig quad;
    std::string name;

    DomainSpec at(double t) const;
    int dim() const { return rho->dim(); }
};

/// rho_hat(z, t) = rho(U^{-1} z, t) for a unitary U: the image family under z -> U z.
DomainFamily rotate_family(const DomainFamily& fam, const CMat& unitary);

/// Built-in families. Parameters (defaults in brackets):
///   disc: radius [1], rate [0]             rho = |z|^2 - radius^2 - rate t
///   ball: dim [2], radius [1], rate [0]    same in C^dim
///   ellipsoid: a [1.2], b [0.8], rate [0]  d = 1: (x/a)^2 + (y/b)^2 - 1 - rate t
///                                           dim 2: |z1/a|^2 + |z2/b|^2 - 1 - rate t
///   bumped_disc: amplitude [0.1], cx [0.5], cy [0], width [0.3], profile [1]
///       rho = |z|^2 - 1 + amplitude p(t) exp(-|z - c|^2 / width^2),
///       p(t) = 1, t, t^2 for profile 0, 1, 2
///   expression: needs `expression`; dim [1], half_width [1.5], center [0]
/// The box is chosen to contain the domain for t in [t_min, t_max].
DomainFamily make_builtin_domain(const std::string& id, const std::map<std::string, double>& params,
                                 const std::string& expression = {}, double t_min = -1.0, double t_max = 1.0);
std::vector<std::string> builtin_domain_ids();

struct DomainCheck {
    std::vector<Vec> boundary;
    double min_gradient = 0.0;
    /// Smallest eigenvalue of the Levi form on the complex tangent (infinite for d = 1).
    double min_levi = 0.0;
    double inradius = 0.0;
    double diameter = 0.0;
};

/// Samples the boundary along rays from the center and checks the center is
/// inside, the gradient does not vanish and the Levi form is positive.
/// Throws PreconditionError on failure.
DomainCheck validate_domain(const DomainSpec& dom, int samples = 256);

struct Quadrature {
    std::vector<Vec> points;
    std::vector<double> weights;
};

Quadrature domain_quadrature(const DomainSpec& dom, const QuadratureConfig& quad);

struct KernelApprox {
    DomainSpec domain;
    int degree = 0;
    /// Complex monomial exponents, graded.
    std::vector<MultiIndex> exponents;
    /// Lower triangular: phi_k = sum_j coefficients(k, j) m_j with
    /// m_j(z) = ((z - center) / scale)^exponents[j].
    CMat coefficients;
    CVec center;
    double scale = 1.0;
    std::size_t nodes = 0;
    double volume = 0.0;
    /// max |<phi_i, phi_j> - delta_ij| under the build quadrature.
    double gram_residual = 0.0;
    /// Monomial recurrence m_j = m_parent[j] * zeta_parent_var[j] (j > 0).
    std::vector<int> parent;
    std::vector<int> parent_var;

    int basis_size() const { return static_cast<int>(exponents.size()); }
    CVec monomials(const CVec& z) const;
    CVec basis(const CVec& z) const;
    std::complex<double> kernel(const CVec& z, const CVec& w) const;
    /// K(z, z) at real coordinates.
    double diagonal(const Vec& x) const;
    /// log K(z, z) as a jet in the real coordinates about x.
    Jet log_diagonal(const Vec& x, int order) const;
};

/// Orthonormal basis of the polynomials of degree <= D in L^2(domain).
/// Needs at least 10 quadrature nodes per basis function.
/// Throws SingularError for a numerically singular Gram matrix and
/// PreconditionError for an empty domain.
KernelApprox kernel_build(const DomainSpec& dom, int degree, const QuadratureConfig& quad);

CVec to_complex(const Vec& x);
Vec to_real(const CVec& z);

/// d^2 log K / dz_i dzbar_j at x.
CMat bergman_hessian(const KernelApprox& ka, const Vec& x);

/// Riemannian metric Re sum h_ij dz_i dzbar_j on R^{2d}; evaluation is
/// refused within margin_fraction * diameter of the boundary.
MetricPtr bergman_metric(std::shared_ptr<const KernelApprox> ka, double margin_fraction = 0.05);

struct DiffeoOptions {
    /// Band |delta| <= tube_inner maps by boundary transport; beyond
    /// tube_outer the map is the identity. Non-positive values mean
    /// 0.15 and 0.4 times the inradius about the center.
    double tube_inner = 0.0;
    double tube_outer = 0.0;
    int boundary_samples = 512;
};

/// Phi(., t): chart of Omega_{t0} -> chart of Omega_t, equal to the identity
/// away from the boundary and mapping the boundary of Omega_{t0} onto that of
/// Omega_t by moving along the normals of Omega_{t0}.
/// Throws PreconditionError when the moved boundary leaves the inner band.
MapPtr family_diffeo(const DomainFamily& fam, double t0, double t, const DiffeoOptions& opt = {});

struct PullbackOptions {
    int degree = 20;
    DiffeoOptions diffeo;
    double margin_fraction = 0.05;
};

/// t -> Phi(., t)^* g_t on the chart of Omega_{t0}, with the family's
/// quadrature settings; metrics at `grid` are built
/// up front (in parallel), others on demand, all memoized.
MetricFamily pullback_family(const DomainFamily& fam, double t0, const PullbackOptions& opt,
                             const std::vector<double>& grid = {});

}  // namespace isojet
