#include "isojet/bergman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "isojet/complex_generic.hpp"
#include "isojet/lowdisc.hpp"
#include "isojet/parallel.hpp"

namespace isojet {

// ------------------------------------------------------------ defining functions

DefiningFunction::DefiningFunction(Expression rho) : rho_(std::move(rho)) {
    const int n = 2 * rho_.complex_dim();
    rho_t_ = rho_.derivative(n);
    for (int k = 0; k < n; ++k) grad_.push_back(rho_.derivative(k));
    hess_.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) hess_[static_cast<std::size_t>(k)].push_back(grad_[static_cast<std::size_t>(k)].derivative(l));
    }
}

namespace {

std::vector<double> with_time(const Vec& x, double t) {
    std::vector<double> v(x.data(), x.data() + x.size());
    v.push_back(t);
    return v;
}

std::vector<Jet> with_time(std::span<const Jet> x, double t) {
    std::vector<Jet> v(x.begin(), x.end());
    v.push_back(Jet::constant(x[0].dim_in(), x[0].degree(), t));
    return v;
}

}  // namespace

double DefiningFunction::value(const Vec& x, double t) const {
    if (x.size() != real_dim()) throw DimensionError("defining function: wrong point dimension");
    return rho_(with_time(x, t));
}

Vec DefiningFunction::gradient(const Vec& x, double t) const {
    const auto v = with_time(x, t);
    Vec g(real_dim());
    for (int k = 0; k < real_dim(); ++k) g(k) = grad_[static_cast<std::size_t>(k)](v);
    return g;
}

Mat DefiningFunction::hessian(const Vec& x, double t) const {
    const auto v = with_time(x, t);
    const int n = real_dim();
    Mat h(n, n);
    for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) h(k, l) = hess_[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)](v);
    }
    return 0.5 * (h + h.transpose());
}

double DefiningFunction::time_derivative(const Vec& x, double t) const { return rho_t_(with_time(x, t)); }

Jet DefiningFunction::value(std::span<const Jet> x, double t) const {
    const auto v = with_time(x, t);
    return rho_.evaluate<Jet>(v);
}

std::vector<Jet> DefiningFunction::gradient(std::span<const Jet> x, double t) const {
    const auto v = with_time(x, t);
    std::vector<Jet> out;
    for (const auto& g : grad_) out.push_back(g.evaluate<Jet>(v));
    return out;
}

CMat DefiningFunction::levi(const Vec& x, double t) const {
    const Mat h = hessian(x, t);
    const int d = dim();
    CMat l(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const double re = 0.25 * (h(2 * i, 2 * j) + h(2 * i + 1, 2 * j + 1));
            const double im = 0.25 * (h(2 * i, 2 * j + 1) - h(2 * i + 1, 2 * j));
            l(i, j) = {re, im};
        }
    }
    return l;
}

CVec DefiningFunction::dz(const Vec& x, double t) const {
    const Vec g = gradient(x, t);
    CVec out(dim());
    for (int k = 0; k < dim(); ++k) out(k) = {0.5 * g(2 * k), -0.5 * g(2 * k + 1)};
    return out;
}

// ---------------------------------------------------------------------- domains

Vec DomainSpec::ray_boundary(const Vec& u) const {
    // largest s with center + s u in the box
    double s_max = std::numeric_limits<double>::infinity();
    for (int k = 0; k < u.size(); ++k) {
        if (u(k) > 0) s_max = std::min(s_max, (box.upper(k) - center(k)) / u(k));
        if (u(k) < 0) s_max = std::min(s_max, (box.lower(k) - center(k)) / u(k));
    }
    const int steps = 256;
    double lo = 0.0;
    double hi = -1.0;
    for (int k = 1; k <= steps; ++k) {
        const double s = s_max * k / steps;
        if (value(center + s * u) >= 0.0) {
            hi = s;
            break;
        }
        lo = s;
    }
    if (hi < 0.0) throw PreconditionError("domain '" + name + "' reaches the edge of its box");
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (value(center + mid * u) >= 0.0 ? hi : lo) = mid;
    }
    return center + 0.5 * (lo + hi) * u;
}

DomainSpec DomainFamily::at(double t) const {
    if (t < t_min - 1e-12 || t > t_max + 1e-12) {
        throw PreconditionError("domain family '" + name + "': t outside [t_min, t_max]");
    }
    std::ostringstream label;
    label << name << "@" << t;
    return {rho, t, box, center, quad, label.str()};
}

namespace {

Mat real_form(const CMat& u) {
    const Eigen::Index d = u.rows();
    Mat a(2 * d, 2 * d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            a(2 * i, 2 * j) = u(i, j).real();
            a(2 * i, 2 * j + 1) = -u(i, j).imag();
            a(2 * i + 1, 2 * j) = u(i, j).imag();
            a(2 * i + 1, 2 * j + 1) = u(i, j).real();
        }
    }
    return a;
}

}  // namespace

DomainFamily rotate_family(const DomainFamily& fam, const CMat& unitary) {
    const int d = fam.dim();
    if (unitary.rows() != d || unitary.cols() != d) throw DimensionError("rotate_family: matrix has wrong size");
    if ((unitary.adjoint() * unitary - CMat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-12) {
        throw PreconditionError("rotate_family: matrix is not unitary");
    }
    const Mat a = real_form(unitary);
    DomainFamily out = fam;
    out.rho = std::make_shared<DefiningFunction>(fam.rho->expression().substitute(a.transpose(), Vec::Zero(2 * d)));
    out.center = a * fam.center;
    // bounding box of the rotated box
    const int n = 2 * d;
    Vec lo = Vec::Constant(n, std::numeric_limits<double>::infinity());
    Vec hi = -lo;
    for (int mask = 0; mask < (1 << n); ++mask) {
        Vec corner(n);
        for (int k = 0; k < n; ++k) corner(k) = (mask >> k) & 1 ? fam.box.upper(k) : fam.box.lower(k);
        const Vec r = a * corner;
        lo = lo.cwiseMin(r);
        hi = hi.cwiseMax(r);
    }
    out.box = {lo, hi};
    out.name = fam.name + "_rotated";
    return out;
}

namespace {

std::string num(double v) {
    std::ostringstream s;
    s.precision(17);
    s << '(' << v << ')';
    return s.str();
}

double param(const std::map<std::string, double>& p, const std::string& key, double fallback) {
    const auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

}  // namespace

DomainFamily make_builtin_domain(const std::string& id, const std::map<std::string, double>& params,
                                 const std::string& expression, double t_min, double t_max) {
    if (!(t_min <= t_max)) throw PreconditionError("domain family: t_min > t_max");
    const double tabs = std::max(std::abs(t_min), std::abs(t_max));
    int dim = 1;
    std::string text;
    double reach = 1.0;  // bound on |x| over the family
    if (id == "disc" || id == "ball") {
        dim = id == "disc" ? 1 : static_cast<int>(param(params, "dim", 2));
        const double r = param(params, "radius", 1.0);
        const double rate = param(params, "rate", 0.0);
        const double lo = r * r - std::abs(rate) * tabs;
        if (!(r > 0.0) || lo <= 0.0) throw PreconditionError("disc: radius^2 must exceed |rate| * |t|");
        text = "|z|^2 - " + num(r * r) + " - " + num(rate) + "*t";
        reach = std::sqrt(r * r + std::abs(rate) * tabs);
    } else if (id == "ellipsoid") {
        dim = static_cast<int>(param(params, "dim", 1));
        const double a = param(params, "a", 1.2);
        const double b = param(params, "b", 0.8);
        const double rate = param(params, "rate", 0.0);
        if (!(a > 0.0 && b > 0.0) || 1.0 - std::abs(rate) * tabs <= 0.0) {
            throw PreconditionError("ellipsoid: axes must be positive and |rate t| < 1");
        }
        if (dim == 1) {
            text = "(x/" + num(a) + ")^2 + (y/" + num(b) + ")^2 - 1 - " + num(rate) + "*t";
        } else if (dim == 2) {
            text = "|z1/" + num(a) + "|^2 + |z2/" + num(b) + "|^2 - 1 - " + num(rate) + "*t";
        } else {
            throw PreconditionError("ellipsoid: dim must be 1 or 2");
        }
        reach = std::max(a, b) * std::sqrt(1.0 + std::abs(rate) * tabs);
    } else if (id == "bumped_disc") {
        const double amp = param(params, "amplitude", 0.1);
        const double cx = param(params, "cx", 0.5);
        const double cy = param(params, "cy", 0.0);
        const double w = param(params, "width", 0.3);
        const int profile = static_cast<int>(param(params, "profile", 1));
        const char* p = profile == 0 ? "1" : profile == 1 ? "t" : "t^2";
        if (profile < 0 || profile > 2) throw PreconditionError("bumped_disc: profile must be 0, 1 or 2");
        const double pmax = profile == 0 ? 1.0 : std::pow(tabs, profile);
        if (std::abs(amp) * pmax >= 0.5) throw PreconditionError("bumped_disc: amplitude too large for the t range");
        text = "|z|^2 - 1 + " + num(amp) + "*" + p + "*exp(-((x - " + num(cx) + ")^2 + (y - " + num(cy) + ")^2)/" +
               num(w * w) + ")";
        reach = std::sqrt(1.0 + std::abs(amp) * pmax);
    } else if (id == "expression") {
        if (expression.empty()) throw PreconditionError("expression domain: missing expression");
        dim = static_cast<int>(param(params, "dim", 1));
        text = expression;
        reach = param(params, "half_width", 1.5) / 1.1;
    } else {
        throw PreconditionError("unknown domain '" + id + "'");
    }
    if (dim < 1) throw PreconditionError("domain: dim must be positive");
    DomainFamily fam;
    fam.rho = std::make_shared<DefiningFunction>(Expression::parse(text, dim));
    fam.t_min = t_min;
    fam.t_max = t_max;
    fam.box = Box::cube(2 * dim, 1.1 * reach);
    fam.center = Vec::Zero(2 * dim);
    fam.name = id;
    return fam;
}

std::vector<std::string> builtin_domain_ids() { return {"disc", "ball", "ellipsoid", "bumped_disc", "expression"}; }

namespace {

std::vector<Vec> ray_directions(int n, int samples) {
    std::vector<Vec> out;
    if (n == 2) {
        for (int k = 0; k < samples; ++k) {
            const double th = 2.0 * std::numbers::pi * k / samples;
            Vec u(2);
            u << std::cos(th), std::sin(th);
            out.push_back(u);
        }
        return out;
    }
    for (const auto& d : direction_net(n, static_cast<std::size_t>(samples))) out.push_back(Eigen::Map<const Vec>(d.data(), n));
    return out;
}

}  // namespace

DomainCheck validate_domain(const DomainSpec& dom, int samples) {
    if (dom.center.size() != 2 * dom.dim()) throw DimensionError("domain: center has wrong dimension");
    if (!dom.inside(dom.center)) throw PreconditionError("domain '" + dom.name + "': center is not inside");
    DomainCheck c;
    c.min_gradient = std::numeric_limits<double>::infinity();
    c.min_levi = std::numeric_limits<double>::infinity();
    c.inradius = std::numeric_limits<double>::infinity();
    for (const Vec& u : ray_directions(2 * dom.dim(), samples)) {
        const Vec b = dom.ray_boundary(u);
        c.boundary.push_back(b);
        c.inradius = std::min(c.inradius, (b - dom.center).norm());
        c.min_gradient = std::min(c.min_gradient, dom.gradient(b).norm());
        if (dom.dim() >= 2) {
            // complex tangent: w with sum_k (d rho / dz_k) w_k = 0
            const CVec a = dom.rho->dz(b, dom.t).conjugate();
            const CMat q = a.householderQr().householderQ();
            const CMat tangent = q.rightCols(dom.dim() - 1);
            const CMat restricted = tangent.adjoint() * dom.rho->levi(b, dom.t).conjugate() * tangent;
            const Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (restricted + restricted.adjoint()));
            c.min_levi = std::min(c.min_levi, es.eigenvalues().minCoeff());
        }
    }
    for (std::size_t i = 0; i < c.boundary.size(); ++i) {
        for (std::size_t j = i + 1; j < c.boundary.size(); ++j) c.diameter = std::max(c.diameter, (c.boundary[i] - c.boundary[j]).norm());
    }
    if (!(c.min_gradient > 1e-10)) throw PreconditionError("domain '" + dom.name + "': gradient vanishes on the boundary");
    if (!(c.min_levi > 0.0)) throw PreconditionError("domain '" + dom.name + "': Levi form is not positive");
    return c;
}

// ------------------------------------------------------------------- quadrature

namespace {

// Gauss-Legendre on [0, 1] by Golub-Welsch.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    Mat j = Mat::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        j(k, k - 1) = b;
        j(k - 1, k) = b;
    }
    const Eigen::SelfAdjointEigenSolver<Mat> es(j);
    x.resize(static_cast<std::size_t>(n));
    w.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        x[static_cast<std::size_t>(k)] = 0.5 * (es.eigenvalues()(k) + 1.0);
        const double v = es.eigenvectors()(0, k);
        w[static_cast<std::size_t>(k)] = v * v;  // 2 v^2 on [-1, 1], halved
    }
}

}  // namespace

Quadrature domain_quadrature(const DomainSpec& dom, const QuadratureConfig& quad) {
    using Method = QuadratureConfig::Method;
    const Method m = quad.method == Method::automatic ? (dom.dim() == 1 ? Method::polar : Method::qmc) : quad.method;
    Quadrature q;
    if (m == Method::polar) {
        if (dom.dim() != 1) throw PreconditionError("polar quadrature needs complex dimension 1");
        if (quad.radial_nodes < 1 || quad.angular_nodes < 3) throw PreconditionError("polar quadrature: too few nodes");
        std::vector<double> r;
        std::vector<double> wr;
        gauss_legendre(quad.radial_nodes, r, wr);
        const double dth = 2.0 * std::numbers::pi / quad.angular_nodes;
        for (int k = 0; k < quad.angular_nodes; ++k) {
            Vec u(2);
            u << std::cos(k * dth), std::sin(k * dth);
            const double big_r = (dom.ray_boundary(u) - dom.center).norm();
            for (std::size_t j = 0; j < r.size(); ++j) {
                q.points.push_back(dom.center + big_r * r[j] * u);
                q.weights.push_back(dth * big_r * big_r * r[j] * wr[j]);
            }
        }
        return q;
    }
    const int n = 2 * dom.dim();
    KroneckerSequence seq(n, quad.qmc_offset);
    const Vec span = dom.box.upper - dom.box.lower;
    const double w = span.prod() / static_cast<double>(quad.qmc_nodes);
    std::vector<double> u(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < quad.qmc_nodes; ++k) {
        seq.point(k, u.data());
        const Vec p = dom.box.lower + span.cwiseProduct(Eigen::Map<const Vec>(u.data(), n));
        if (dom.value(p) < 0.0) {
            q.points.push_back(p);
            q.weights.push_back(w);
        }
    }
    return q;
}

// ---------------------------------------------------------------------- kernel

CVec to_complex(const Vec& x) {
    CVec z(x.size() / 2);
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = {x(2 * k), x(2 * k + 1)};
    return z;
}

Vec to_real(const CVec& z) {
    Vec x(2 * z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        x(2 * k) = z(k).real();
        x(2 * k + 1) = z(k).imag();
    }
    return x;
}

namespace {

void graded_exponents(int d, int degree, std::vector<MultiIndex>& out) {
    for (int total = 0; total <= degree; ++total) {
        std::vector<int> e(static_cast<std::size_t>(d), 0);
        // all exponent vectors of this total, lexicographically descending
        std::function<void(int, int)> rec = [&](int pos, int left) {
            if (pos == d - 1) {
                e[static_cast<std::size_t>(pos)] = left;
                out.emplace_back(e);
                return;
            }
            for (int v = left; v >= 0; --v) {
                e[static_cast<std::size_t>(pos)] = v;
                rec(pos + 1, left - v);
            }
        };
        rec(0, total);
    }
}

}  // namespace

CVec KernelApprox::monomials(const CVec& z) const {
    const CVec zeta = (z - center) / scale;
    CVec m(basis_size());
    m(0) = 1.0;
    for (int j = 1; j < basis_size(); ++j) {
        m(j) = m(parent[static_cast<std::size_t>(j)]) * zeta(parent_var[static_cast<std::size_t>(j)]);
    }
    return m;
}

CVec KernelApprox::basis(const CVec& z) const { return coefficients.triangularView<Eigen::Lower>() * monomials(z); }

std::complex<double> KernelApprox::kernel(const CVec& z, const CVec& w) const {
    return basis(z).transpose() * basis(w).conjugate();
}

double KernelApprox::diagonal(const Vec& x) const { return basis(to_complex(x)).squaredNorm(); }

Jet KernelApprox::log_diagonal(const Vec& x, int order) const {
    const int n = static_cast<int>(x.size());
    const int d = n / 2;
    std::vector<Cplx<Jet>> zeta;
    for (int k = 0; k < d; ++k) {
        Jet re = (Jet::variable(n, order, 2 * k, x(2 * k)) - center(k).real()) / scale;
        Jet im = (Jet::variable(n, order, 2 * k + 1, x(2 * k + 1)) - center(k).imag()) / scale;
        zeta.push_back({std::move(re), std::move(im)});
    }
    const int nb = basis_size();
    std::vector<Cplx<Jet>> m;
    m.reserve(static_cast<std::size_t>(nb));
    m.push_back({Jet::constant(n, order, 1.0), Jet::constant(n, order, 0.0)});
    for (int j = 1; j < nb; ++j) {
        m.push_back(m[static_cast<std::size_t>(parent[static_cast<std::size_t>(j)])] *
                    zeta[static_cast<std::size_t>(parent_var[static_cast<std::size_t>(j)])]);
    }
    Jet k_diag = Jet::constant(n, order, 0.0);
    for (int k = 0; k < nb; ++k) {
        Jet re = Jet::constant(n, order, 0.0);
        Jet im = Jet::constant(n, order, 0.0);
        for (int j = 0; j <= k; ++j) {
            const std::complex<double> c = coefficients(k, j);
            const auto& mj = m[static_cast<std::size_t>(j)];
            re.add_scaled(mj.re, c.real()).add_scaled(mj.im, -c.imag());
            im.add_scaled(mj.im, c.real()).add_scaled(mj.re, c.imag());
        }
        k_diag += re * re;
        k_diag += im * im;
    }
    return log(k_diag);
}

KernelApprox kernel_build(const DomainSpec& dom, int degree, const QuadratureConfig& quad) {
    if (degree < 0) throw PreconditionError("kernel_build: negative degree");
    const DomainCheck check = validate_domain(dom, dom.dim() == 1 ? 256 : 512);
    KernelApprox ka;
    ka.domain = dom;
    ka.domain.quad = quad;
    ka.degree = degree;
    const int d = dom.dim();
    graded_exponents(d, degree, ka.exponents);
    const int nb = ka.basis_size();
    ka.parent.assign(static_cast<std::size_t>(nb), -1);
    ka.parent_var.assign(static_cast<std::size_t>(nb), -1);
    for (int j = 1; j < nb; ++j) {
        const MultiIndex& e = ka.exponents[static_cast<std::size_t>(j)];
        for (int v = 0; v < d; ++v) {
            if (e[v] == 0) continue;
            std::vector<int> lower = e.exponents();
            --lower[static_cast<std::size_t>(v)];
            const auto it = std::find(ka.exponents.begin(), ka.exponents.end(), MultiIndex(lower));
            ka.parent[static_cast<std::size_t>(j)] = static_cast<int>(it - ka.exponents.begin());
            ka.parent_var[static_cast<std::size_t>(j)] = v;
            break;
        }
    }
    ka.center = to_complex(dom.center);
    ka.scale = 0.0;
    for (const Vec& b : check.boundary) ka.scale = std::max(ka.scale, (b - dom.center).norm());
    ka.coefficients = CMat::Identity(nb, nb);

    const Quadrature q = domain_quadrature(dom, quad);
    if (q.points.empty()) throw PreconditionError("kernel_build: domain '" + dom.name + "' is empty");
    if (q.points.size() < 10 * static_cast<std::size_t>(nb)) {
        throw PreconditionError("kernel_build: need at least 10 quadrature nodes per basis function");
    }
    ka.nodes = q.points.size();
    for (double w : q.weights) ka.volume += w;

    // Gram matrix, chunked; the chunk sums are added in a fixed order
    const std::size_t chunk = 2048;
    const std::size_t nchunks = (q.points.size() + chunk - 1) / chunk;
    std::vector<CMat> partial(nchunks);
    parallel_for(nchunks, [&](std::size_t c) {
        const std::size_t begin = c * chunk;
        const std::size_t end = std::min(q.points.size(), begin + chunk);
        CMat v(static_cast<Eigen::Index>(end - begin), nb);
        for (std::size_t i = begin; i < end; ++i) {
            v.row(static_cast<Eigen::Index>(i - begin)) = std::sqrt(q.weights[i]) * ka.monomials(to_complex(q.points[i])).transpose();
        }
        partial[c] = v.adjoint() * v;
    });
    CMat gram = CMat::Zero(nb, nb);
    for (const auto& p : partial) gram += p;
    // <m_j, m_k> = sum w m_k conj(m_j); the adjoint product gives its conjugate
    gram = gram.conjugate().eval();

    const Eigen::LLT<CMat> llt(gram);
    if (llt.info() != Eigen::Success) throw SingularError("kernel_build: Gram matrix is numerically singular");
    const CMat l = llt.matrixL();
    const double gmax = gram.diagonal().real().maxCoeff();
    for (int k = 0; k < nb; ++k) {
        if (std::norm(l(k, k)) < 1e-14 * gmax) throw SingularError("kernel_build: Gram matrix is numerically singular");
    }
    ka.coefficients = l.triangularView<Eigen::Lower>().solve(CMat::Identity(nb, nb));
    // phi = C m; <phi_a, phi_b> = sum_jk C_aj conj(C_bk) <m_j, m_k>
    const CMat orth = ka.coefficients * gram.transpose() * ka.coefficients.adjoint();
    ka.gram_residual = (orth - CMat::Identity(nb, nb)).cwiseAbs().maxCoeff();
    return ka;
}

CMat bergman_hessian(const KernelApprox& ka, const Vec& x) {
    const Jet l = ka.log_diagonal(x, 2);
    const int n = static_cast<int>(x.size());
    const int d = n / 2;
    auto second = [&](int a, int b) {
        std::vector<int> e(static_cast<std::size_t>(n), 0);
        ++e[static_cast<std::size_t>(a)];
        ++e[static_cast<std::size_t>(b)];
        const double c = l.coeff(MultiIndex(e));
        return a == b ? 2.0 * c : c;
    };
    CMat h(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            h(i, j) = {0.25 * (second(2 * i, 2 * j) + second(2 * i + 1, 2 * j + 1)),
                       0.25 * (second(2 * i, 2 * j + 1) - second(2 * i + 1, 2 * j))};
        }
    }
    return h;
}

// ---------------------------------------------------------------- Bergman metric

namespace {

// Inside the domain and at least `margin` from the sampled boundary.
RegionPredicate interior_predicate(const DomainSpec& dom, double margin_fraction, DomainCheck* out = nullptr) {
    const DomainCheck check = validate_domain(dom, dom.dim() == 1 ? 1024 : 2048);
    auto boundary = std::make_shared<std::vector<Vec>>(check.boundary);
    const double margin = margin_fraction * check.diameter;
    if (out) *out = check;
    double r_min = std::numeric_limits<double>::infinity();
    for (const Vec& b : check.boundary) r_min = std::min(r_min, (b - dom.center).norm());
    return [dom, boundary, margin, r_min](const Vec& p) {
        if (!dom.inside(p)) return false;
        // every sample is at least r_min from the center
        if ((p - dom.center).norm() + margin < r_min) return true;
        for (const Vec& b : *boundary) {
            if ((p - b).norm() < margin) return false;
        }
        return true;
    };
}

class BergmanMetric final : public ChartMetric {
public:
    BergmanMetric(std::shared_ptr<const KernelApprox> ka, RegionPredicate inside)
        : ChartMetric(ka->domain.box, "bergman(" + ka->domain.name + ")", std::move(inside)), ka_(std::move(ka)) {}

    Mat value(const Vec& p) const override {
        const Mat g = expand(p, 0).constant_term();
        if (!(min_eigenvalue(g) > 0.0)) {
            throw PreconditionError("bergman metric: not positive definite (kernel approximation too coarse here)");
        }
        return g;
    }

    JetMatrix expand(const Vec& p, int order) const override {
        const int n = dim();
        const int d = n / 2;
        const Jet l = ka_->log_diagonal(p, order + 2);
        std::vector<Jet> first;
        for (int a = 0; a < n; ++a) first.push_back(derivative(l, a));
        auto second = [&](int a, int b) { return derivative(first[static_cast<std::size_t>(a)], b); };
        JetMatrix g(n, n, n, order);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                const Jet re = 0.25 * (second(2 * i, 2 * j) + second(2 * i + 1, 2 * j + 1));
                const Jet im = 0.25 * (second(2 * i, 2 * j + 1) - second(2 * i + 1, 2 * j));
                g(2 * i, 2 * j) = re;
                g(2 * i + 1, 2 * j + 1) = re;
                g(2 * i, 2 * j + 1) = im;
                g(2 * i + 1, 2 * j) = -im;
            }
        }
        // exact symmetry despite rounding in the mixed partials
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) {
                Jet s = 0.5 * (g(a, b) + g(b, a));
                g(a, b) = s;
                g(b, a) = std::move(s);
            }
        }
        return g;
    }

    std::vector<Mat> first_partials(const Vec& p) const override {
        const JetMatrix e = expand(p, 1);
        const int n = dim();
        std::vector<Mat> out(static_cast<std::size_t>(n), Mat(n, n));
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(k)](i, j) = e(i, j).coeff(static_cast<std::size_t>(1 + k));
            }
        }
        return out;
    }

    bool analytic() const override { return true; }

private:
    std::shared_ptr<const KernelApprox> ka_;
};

}  // namespace

MetricPtr bergman_metric(std::shared_ptr<const KernelApprox> ka, double margin_fraction) {
    if (!ka) throw PreconditionError("bergman_metric: null kernel");
    RegionPredicate inside = interior_predicate(ka->domain, margin_fraction);
    return std::make_shared<BergmanMetric>(std::move(ka), std::move(inside));
}

// ---------------------------------------------------------------- diffeomorphism

namespace {

// e^{-1/u} glued to 0, and the smooth step built from it
Jet flat_exp(const Jet& u) {
    if (u.value() <= 0.0) return u * 0.0;
    return exp(-reciprocal(u));
}

double smooth_step(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / u);
    const double b = std::exp(-1.0 / (1.0 - u));
    return a / (a + b);
}

Jet smooth_step(const Jet& u) {
    if (u.value() <= 0.0) return u * 0.0;
    if (u.value() >= 1.0) return u * 0.0 + 1.0;
    const Jet a = flat_exp(u);
    const Jet b = flat_exp(1.0 - u);
    return a / (a + b);
}

Jet norm(const std::vector<Jet>& v) {
    Jet s = v[0] * v[0];
    for (std::size_t k = 1; k < v.size(); ++k) s += v[k] * v[k];
    return sqrt(s);
}

class DomainDiffeo final : public ChartMap {
public:
    DomainDiffeo(DomainSpec d0, DomainSpec dt, const DiffeoOptions& opt) : d0_(std::move(d0)), dt_(std::move(dt)) {
        const DomainCheck check = validate_domain(d0_, opt.boundary_samples);
        boundary_ = check.boundary;
        r_min_ = std::numeric_limits<double>::infinity();
        for (const Vec& b : boundary_) r_min_ = std::min(r_min_, (b - d0_.center).norm());
        inner_ = opt.tube_inner > 0.0 ? opt.tube_inner : 0.15 * check.inradius;
        outer_ = opt.tube_outer > 0.0 ? opt.tube_outer : 0.4 * check.inradius;
        if (!(inner_ < outer_)) throw PreconditionError("family_diffeo: tube_inner must be below tube_outer");
        for (const Vec& b : boundary_) {
            const Vec n0 = -d0_.gradient(b).normalized();
            if (std::abs(transport(b, n0)) > inner_) throw PreconditionError("family_diffeo: tube exceeded");
        }
    }

    int dim() const override { return 2 * d0_.dim(); }

    Vec apply(const Vec& x) const override {
        Vec y;
        double mu = 0.0;
        if (!locate(x, y, mu)) return x;
        const Vec g0 = d0_.gradient(y);
        const double delta = mu * g0.norm();
        const Vec n0 = -g0.normalized();
        const Vec f = y + transport(y, n0) * n0;
        const Vec nt = -dt_.gradient(f).normalized();
        const double sign = delta >= 0.0 ? 1.0 : -1.0;
        const double chi = 1.0 - smooth_step((sign * delta - inner_) / (outer_ - inner_));
        return x + chi * (f + delta * nt - x);
    }

    JetMap expand(const Vec& x, int order) const override {
        const int n = dim();
        std::vector<Jet> xs;
        for (int k = 0; k < n; ++k) xs.push_back(Jet::variable(n, order, k, x(k)));
        Vec y;
        double mu = 0.0;
        if (!locate(x, y, mu)) return JetMap(std::move(xs));
        const Vec g0 = d0_.gradient(y);
        const double delta0 = mu * g0.norm();

        // chord iterations: each pass fixes one more order
        Mat jac = Mat::Zero(n + 1, n + 1);
        jac.topLeftCorner(n, n) = Mat::Identity(n, n) - mu * d0_.rho->hessian(y, d0_.t);
        jac.block(0, n, n, 1) = -g0;
        jac.block(n, 0, 1, n) = g0.transpose();
        const Mat jinv = jac.inverse();
        std::vector<Jet> yj;
        for (int k = 0; k < n; ++k) yj.push_back(Jet::constant(n, order, y(k)));
        Jet muj = Jet::constant(n, order, mu);
        for (int it = 0; it < order; ++it) {
            const std::vector<Jet> grad = d0_.rho->gradient(yj, d0_.t);
            std::vector<Jet> res;
            for (int k = 0; k < n; ++k) res.push_back(yj[static_cast<std::size_t>(k)] - muj * grad[static_cast<std::size_t>(k)] - xs[static_cast<std::size_t>(k)]);
            res.push_back(d0_.rho->value(yj, d0_.t));
            for (int k = 0; k <= n; ++k) {
                Jet& target = k < n ? yj[static_cast<std::size_t>(k)] : muj;
                for (int l = 0; l <= n; ++l) target.add_scaled(res[static_cast<std::size_t>(l)], -jinv(k, l));
            }
        }
        const std::vector<Jet> grad0 = d0_.rho->gradient(yj, d0_.t);
        const Jet gnorm = norm(grad0);
        std::vector<Jet> n0;
        for (const Jet& gk : grad0) n0.push_back(-(gk / gnorm));
        const Jet delta = muj * gnorm;
        const double sign = delta0 >= 0.0 ? 1.0 : -1.0;
        const Jet chi = 1.0 - smooth_step((sign * delta - inner_) / (outer_ - inner_));

        // boundary transport along the t0 normal: rho_t(y + s n0) = 0
        const Vec n0v = -g0.normalized();
        const double s0 = transport(y, n0v);
        const double slope = dt_.gradient(y + s0 * n0v).dot(n0v);
        Jet s = Jet::constant(n, order, s0);
        std::vector<Jet> f(static_cast<std::size_t>(n));
        for (int it = 0; it <= order; ++it) {
            for (int k = 0; k < n; ++k) f[static_cast<std::size_t>(k)] = yj[static_cast<std::size_t>(k)] + s * n0[static_cast<std::size_t>(k)];
            if (it == order) break;
            s.add_scaled(dt_.rho->value(f, dt_.t), -1.0 / slope);
        }
        const std::vector<Jet> gt = dt_.rho->gradient(f, dt_.t);
        const Jet gtn = norm(gt);
        std::vector<Jet> out;
        for (int k = 0; k < n; ++k) {
            const Jet nt = -(gt[static_cast<std::size_t>(k)] / gtn);
            const Jet moved = f[static_cast<std::size_t>(k)] + delta * nt;
            out.push_back(xs[static_cast<std::size_t>(k)] + chi * (moved - xs[static_cast<std::size_t>(k)]));
        }
        return JetMap(std::move(out));
    }

private:
    // Closest boundary point y and multiplier mu; false outside the outer band.
    bool locate(const Vec& x, Vec& y, double& mu) const {
        if ((x - d0_.center).norm() + 1.1 * outer_ < r_min_) return false;
        double nearest = std::numeric_limits<double>::infinity();
        std::size_t at = 0;
        for (std::size_t j = 0; j < boundary_.size(); ++j) {
            const double dist = (x - boundary_[j]).norm();
            if (dist < nearest) {
                nearest = dist;
                at = j;
            }
        }
        // the sampled distance overestimates slightly; 10% slack keeps the band exact
        if (nearest > 1.1 * outer_) return false;
        y = boundary_[at];
        project(x, y, mu);
        return std::abs(mu * d0_.gradient(y).norm()) < outer_;
    }

    // Newton for (y, mu) with y on the t0 boundary and x = y - mu grad rho0(y).
    void project(const Vec& x, Vec& y, double& mu) const {
        const int n = dim();
        Vec g = d0_.gradient(y);
        mu = (y - x).dot(g) / g.squaredNorm();
        for (int it = 0; it < 60; ++it) {
            g = d0_.gradient(y);
            Vec res(n + 1);
            res.head(n) = y - mu * g - x;
            res(n) = d0_.value(y);
            if (res.norm() < 1e-15 * (1.0 + x.norm())) return;
            Mat jac = Mat::Zero(n + 1, n + 1);
            jac.topLeftCorner(n, n) = Mat::Identity(n, n) - mu * d0_.rho->hessian(y, d0_.t);
            jac.block(0, n, n, 1) = -g;
            jac.block(n, 0, 1, n) = g.transpose();
            const Vec step = jac.fullPivLu().solve(res);
            y -= step.head(n);
            mu -= step(n);
            if (step.norm() < 1e-15 * (1.0 + x.norm())) return;
        }
        g = d0_.gradient(y);
        Vec res(n + 1);
        res.head(n) = y - mu * g - x;
        res(n) = d0_.value(y);
        if (res.norm() > 1e-10) throw ConvergenceError("family_diffeo: closest-point projection failed");
    }

    // s with rho_t(b + s n) = 0, by Newton from s = 0.
    double transport(const Vec& b, const Vec& n) const {
        double s = 0.0;
        for (int it = 0; it < 60; ++it) {
            const Vec p = b + s * n;
            const double r = dt_.value(p);
            const double slope = dt_.gradient(p).dot(n);
            if (slope == 0.0) break;
            const double step = r / slope;
            s -= step;
            if (std::abs(step) < 1e-16 * (1.0 + std::abs(s))) return s;
        }
        if (std::abs(dt_.value(b + s * n)) > 1e-12) throw ConvergenceError("family_diffeo: boundary transport failed");
        return s;
    }

    DomainSpec d0_;
    DomainSpec dt_;
    std::vector<Vec> boundary_;
    double r_min_ = 0.0;
    double inner_ = 0.0;
    double outer_ = 0.0;
};

class IdentityMap final : public ChartMap {
public:
    explicit IdentityMap(int dim) : dim_(dim) {}
    int dim() const override { return dim_; }
    Vec apply(const Vec& x) const override { return x; }
    JetMap expand(const Vec& x, int order) const override {
        std::vector<Jet> xs;
        for (int k = 0; k < dim_; ++k) xs.push_back(Jet::variable(dim_, order, k, x(k)));
        return JetMap(std::move(xs));
    }

private:
    int dim_;
};

}  // namespace

MapPtr family_diffeo(const DomainFamily& fam, double t0, double t, const DiffeoOptions& opt) {
    const DomainSpec d0 = fam.at(t0);
    const DomainSpec dt = fam.at(t);
    if (t == t0) return std::make_shared<IdentityMap>(2 * fam.dim());
    return std::make_shared<DomainDiffeo>(d0, dt, opt);
}

MetricFamily pullback_family(const DomainFamily& fam, double t0, const PullbackOptions& opt, const std::vector<double>& grid) {
    const DomainSpec d0 = fam.at(t0);
    const RegionPredicate inside0 = interior_predicate(d0, opt.margin_fraction);
    const Box region0 = d0.box;
    auto build = [fam, t0, opt, inside0, region0](double t) -> MetricPtr {
        const DomainSpec st = fam.at(t);
        auto ka = std::make_shared<const KernelApprox>(kernel_build(st, opt.degree, st.quad));
        MetricPtr g = bergman_metric(ka, opt.margin_fraction);
        MapPtr phi = family_diffeo(fam, t0, t, opt.diffeo);
        std::ostringstream name;
        name << "pullback(" << st.name << ")";
        return std::make_shared<PullbackMetric>(std::move(g), std::move(phi), region0, name.str(), inside0);
    };
    auto prebuilt = std::make_shared<std::map<double, MetricPtr>>();
    std::vector<MetricPtr> built(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) { built[k] = build(grid[k]); });
    for (std::size_t k = 0; k < grid.size(); ++k) (*prebuilt)[grid[k]] = built[k];
    return MetricFamily(
        fam.t_min, fam.t_max,
        [prebuilt, build](double t) {
            const auto it = prebuilt->find(t);
            return it != prebuilt->end() ? it->second : build(t);
        },
        "pullback(" + fam.name + ")", true);
}

}  // namespace isojet
