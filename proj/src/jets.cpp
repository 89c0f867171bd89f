#include "isojet/jets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "isojet/error.hpp"

namespace isojet {

// ---------------------------------------------------------------- MultiIndex

MultiIndex::MultiIndex(std::vector<int> exponents) : exps_(std::move(exponents)) {
    for (int e : exps_) {
        if (e < 0) throw DimensionError("multi-index exponents must be nonnegative");
    }
}

MultiIndex::MultiIndex(std::initializer_list<int> exponents)
    : MultiIndex(std::vector<int>(exponents)) {}

int MultiIndex::order() const { return std::accumulate(exps_.begin(), exps_.end(), 0); }

std::strong_ordering MultiIndex::operator<=>(const MultiIndex& other) const {
    if (auto c = order() <=> other.order(); c != 0) return c;
    if (auto c = size() <=> other.size(); c != 0) return c;
    for (std::size_t i = 0; i < exps_.size(); ++i) {
        // larger leading exponent sorts first
        if (auto c = other.exps_[i] <=> exps_[i]; c != 0) return c;
    }
    return std::strong_ordering::equal;
}

std::string MultiIndex::to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < exps_.size(); ++i) os << (i ? "," : "") << exps_[i];
    os << ')';
    return os.str();
}

// ----------------------------------------------------------------- JetLayout

namespace {

void append_order(int dim, int remaining, std::vector<int>& prefix, std::vector<MultiIndex>& out) {
    if (static_cast<int>(prefix.size()) == dim - 1) {
        prefix.push_back(remaining);
        out.emplace_back(prefix);
        prefix.pop_back();
        return;
    }
    for (int e = remaining; e >= 0; --e) {
        prefix.push_back(e);
        append_order(dim, remaining - e, prefix, out);
        prefix.pop_back();
    }
}

}  // namespace

JetLayout::JetLayout(int dim, int degree) : dim_(dim), degree_(degree) {
    if (dim < 1 || degree < 0) throw DimensionError("jet layout needs dim >= 1 and degree >= 0");
    for (int k = 0; k <= degree; ++k) {
        begins_.push_back(indices_.size());
        std::vector<int> prefix;
        append_order(dim, k, prefix, indices_);
    }
    begins_.push_back(indices_.size());

    const std::size_t n = indices_.size();
    orders_.resize(n);
    lookup_.reserve(n);
    std::vector<std::uint64_t> keys(n);
    for (std::size_t r = 0; r < n; ++r) {
        orders_[r] = indices_[r].order();
        keys[r] = key(indices_[r].exponents());
        lookup_.emplace_back(keys[r], r);
    }
    std::sort(lookup_.begin(), lookup_.end());

    const auto ud = static_cast<std::size_t>(dim);
    raise_.assign(n * ud, npos);
    lower_.assign(n * ud, npos);
    for (std::size_t r = 0; r < n; ++r) {
        for (int v = 0; v < dim; ++v) {
            const auto uv = static_cast<std::size_t>(v);
            std::vector<int> e = indices_[r].exponents();
            if (orders_[r] < degree) {
                e[uv] += 1;
                raise_[r * ud + uv] = rank(MultiIndex(e));
                e[uv] -= 1;
            }
            if (e[uv] > 0) {
                e[uv] -= 1;
                lower_[r * ud + uv] = rank(MultiIndex(e));
            }
        }
    }

    // Digits in base (degree + 1) never carry when the sum has order <= degree,
    // so key(alpha + beta) == key(alpha) + key(beta).
    auto find_key = [this](std::uint64_t k) {
        auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(k, std::size_t{0}));
        return it->second;
    };
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (orders_[a] + orders_[b] > degree) break;
            products_.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                                 static_cast<std::uint32_t>(find_key(keys[a] + keys[b]))});
        }
    }
}

std::uint64_t JetLayout::key(const std::vector<int>& exps) const {
    std::uint64_t k = 0;
    const auto base = static_cast<std::uint64_t>(degree_ + 1);
    for (auto it = exps.rbegin(); it != exps.rend(); ++it) k = k * base + static_cast<std::uint64_t>(*it);
    return k;
}

std::size_t JetLayout::rank(const MultiIndex& alpha) const {
    if (alpha.size() != dim_) throw DimensionError("multi-index has wrong dimension");
    if (alpha.order() > degree_) throw DimensionError("multi-index order exceeds jet degree");
    const std::uint64_t k = key(alpha.exponents());
    auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(k, std::size_t{0}));
    return it->second;
}

std::shared_ptr<const JetLayout> JetLayout::get(int dim, int degree) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::shared_ptr<const JetLayout>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[{dim, degree}];
    if (!slot) slot = std::make_shared<const JetLayout>(dim, degree);
    return slot;
}

// ----------------------------------------------------------------------- Jet

Jet::Jet(int dim_in, int degree, int value_dim)
    : layout_(JetLayout::get(dim_in, degree)), value_dim_(value_dim) {
    if (value_dim < 1) throw DimensionError("jet value dimension must be positive");
    c_.assign(layout_->size() * static_cast<std::size_t>(value_dim), 0.0);
}

Jet Jet::constant(int dim_in, int degree, double value) {
    Jet j(dim_in, degree);
    j.c_[0] = value;
    return j;
}

Jet Jet::variable(int dim_in, int degree, int var, double center) {
    if (var < 0 || var >= dim_in) throw DimensionError("variable index out of range");
    Jet j(dim_in, degree);
    j.c_[0] = center;
    if (degree >= 1) j.c_[static_cast<std::size_t>(1 + var)] = 1.0;
    return j;
}

Jet Jet::from_coefficients(int dim_in, int degree, int value_dim, std::vector<double> coeffs) {
    Jet j(dim_in, degree, value_dim);
    if (coeffs.size() != j.c_.size()) throw DimensionError("coefficient count does not match jet shape");
    j.c_ = std::move(coeffs);
    return j;
}

double Jet::coeff(const MultiIndex& alpha, int comp) const {
    if (alpha.order() > degree()) return 0.0;
    return coeff(layout_->rank(alpha), comp);
}

void Jet::set(const MultiIndex& alpha, int comp, double value) {
    if (comp < 0 || comp >= value_dim_) throw DimensionError("value component out of range");
    coeff(layout_->rank(alpha), comp) = value;
}

Jet Jet::component(int comp) const {
    if (comp < 0 || comp >= value_dim_) throw DimensionError("value component out of range");
    Jet out(dim_in(), degree());
    for (std::size_t r = 0; r < num_monomials(); ++r) out.c_[r] = coeff(r, comp);
    return out;
}

Jet Jet::stack(std::span<const Jet> scalars) {
    if (scalars.empty()) throw DimensionError("cannot stack zero jets");
    const Jet& first = scalars.front();
    Jet out(first.dim_in(), first.degree(), static_cast<int>(scalars.size()));
    for (std::size_t k = 0; k < scalars.size(); ++k) {
        const Jet& s = scalars[k];
        if (s.value_dim_ != 1 || s.layout_ != first.layout_) throw DimensionError("stacked jets must share shape");
        for (std::size_t r = 0; r < out.num_monomials(); ++r) out.coeff(r, static_cast<int>(k)) = s.c_[r];
    }
    return out;
}

bool Jet::same_shape(const Jet& other) const {
    return layout_ == other.layout_ && value_dim_ == other.value_dim_;
}

void Jet::require_same_shape(const Jet& other, const char* what) const {
    if (!same_shape(other)) {
        throw DimensionError(std::string(what) + ": jets differ in dim_in, degree or value dimension");
    }
}

Jet& Jet::operator+=(const Jet& other) {
    require_same_shape(other, "jet addition");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += other.c_[i];
    return *this;
}

Jet& Jet::operator-=(const Jet& other) {
    require_same_shape(other, "jet subtraction");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= other.c_[i];
    return *this;
}

Jet& Jet::add_scaled(const Jet& other, double s) {
    require_same_shape(other, "jet axpy");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += s * other.c_[i];
    return *this;
}

Jet& Jet::operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
}

Jet& Jet::operator/=(double s) {
    for (double& v : c_) v /= s;
    return *this;
}

Jet& Jet::operator+=(double s) {
    if (value_dim_ != 1) throw DimensionError("adding a number needs a scalar jet");
    c_[0] += s;
    return *this;
}

Jet& Jet::operator-=(double s) { return *this += -s; }

Jet Jet::operator-() const {
    Jet out = *this;
    for (double& v : out.c_) v = -v;
    return out;
}

Jet operator*(const Jet& a, const Jet& b) {
    if (a.layout_ != b.layout_) throw DimensionError("jet product: jets differ in dim_in or degree");
    if (a.value_dim_ != 1 && b.value_dim_ != 1) {
        throw DimensionError("jet product needs at least one scalar-valued operand");
    }
    const Jet& s = a.value_dim_ == 1 ? a : b;
    const Jet& v = a.value_dim_ == 1 ? b : a;
    Jet out(a.dim_in(), a.degree(), v.value_dim_);
    const std::size_t w = v.stride();
    const double* sc = s.c_.data();
    const double* vc = v.c_.data();
    double* oc = out.c_.data();
    if (w == 1) {
        for (const auto& p : a.layout_->products()) oc[p.out] += sc[p.lhs] * vc[p.rhs];
    } else {
        for (const auto& p : a.layout_->products()) {
            const double f = sc[p.lhs];
            for (std::size_t k = 0; k < w; ++k) oc[p.out * w + k] += f * vc[p.rhs * w + k];
        }
    }
    return out;
}

Jet jet_arith(const Jet& a, const Jet& b, JetOp op, double s) {
    switch (op) {
        case JetOp::add:
            return a + b;
        case JetOp::mul:
            if (a.value_dim() != 1 || b.value_dim() != 1) {
                throw DimensionError("jet multiplication requires scalar-valued jets");
            }
            return a * b;
        case JetOp::scale:
            return a * s;
    }
    throw PreconditionError("unknown jet operation");
}

Jet truncate(const Jet& f, int n) {
    if (n > f.degree()) throw PreconditionError("truncation degree exceeds jet degree");
    if (n < 0) throw PreconditionError("truncation degree must be nonnegative");
    const std::size_t keep = JetLayout::get(f.dim_in(), n)->size() * static_cast<std::size_t>(f.value_dim());
    std::vector<double> c(f.coefficients().begin(), f.coefficients().begin() + static_cast<std::ptrdiff_t>(keep));
    return Jet::from_coefficients(f.dim_in(), n, f.value_dim(), std::move(c));
}

Jet extend(const Jet& f, int n) {
    if (n < f.degree()) throw PreconditionError("extension degree below jet degree");
    Jet out(f.dim_in(), n, f.value_dim());
    std::copy(f.coefficients().begin(), f.coefficients().end(), out.coefficients().begin());
    return out;
}

Jet derivative(const Jet& f, int var) {
    if (var < 0 || var >= f.dim_in()) throw DimensionError("derivative variable out of range");
    const int n = std::max(0, f.degree() - 1);
    Jet out(f.dim_in(), n, f.value_dim());
    if (f.degree() == 0) return out;
    const JetLayout& lay = f.layout();
    const int w = f.value_dim();
    // ranks of order <= n coincide between the two layouts
    for (std::size_t r = 0; r < lay.size(); ++r) {
        const int e = lay.index(r)[var];
        if (e == 0) continue;
        const std::size_t dst = lay.lower(r, var);
        for (int k = 0; k < w; ++k) out.coeff(dst, k) = e * f.coeff(r, k);
    }
    return out;
}

double evaluate(const Jet& f, std::span<const double> x, int comp) {
    if (static_cast<int>(x.size()) != f.dim_in()) throw DimensionError("evaluation point has wrong dimension");
    const JetLayout& lay = f.layout();
    std::vector<double> mono(lay.size());
    mono[0] = 1.0;
    for (std::size_t r = 1; r < lay.size(); ++r) {
        const MultiIndex& a = lay.index(r);
        int v = 0;
        while (a[v] == 0) ++v;
        mono[r] = mono[lay.lower(r, v)] * x[static_cast<std::size_t>(v)];
    }
    double s = 0.0;
    for (std::size_t r = 0; r < lay.size(); ++r) s += f.coeff(r, comp) * mono[r];
    return s;
}

double max_abs_difference(const Jet& a, const Jet& b) {
    if (!a.same_shape(b)) throw DimensionError("compared jets differ in shape");
    double m = 0.0;
    for (std::size_t i = 0; i < a.coefficients().size(); ++i) {
        m = std::max(m, std::abs(a.coefficients()[i] - b.coefficients()[i]));
    }
    return m;
}

// ---------------------------------------------------------- elementary jets

Jet apply_univariate(const Jet& x, std::span<const double> taylor) {
    if (x.value_dim() != 1) throw DimensionError("elementary functions need scalar jets");
    const int n = std::min(x.degree(), static_cast<int>(taylor.size()) - 1);
    Jet delta = x;
    delta.coeff(0) = 0.0;
    Jet out = Jet::constant(x.dim_in(), x.degree(), taylor[static_cast<std::size_t>(n)]);
    for (int k = n - 1; k >= 0; --k) {
        out = out * delta;
        out.coeff(0) += taylor[static_cast<std::size_t>(k)];
    }
    return out;
}

namespace {

std::vector<double> taylor_buffer(const Jet& x) { return std::vector<double>(static_cast<std::size_t>(x.degree()) + 1); }

}  // namespace

Jet reciprocal(const Jet& x) {
    const double c = x.value();
    if (c == 0.0) throw SingularError("reciprocal of a jet with zero constant term");
    auto t = taylor_buffer(x);
    t[0] = 1.0 / c;
    for (std::size_t k = 1; k < t.size(); ++k) t[k] = -t[k - 1] / c;
    return apply_univariate(x, t);
}

Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

Jet operator/(double s, const Jet& b) { return reciprocal(b) * s; }

Jet exp(const Jet& x) {
    auto t = taylor_buffer(x);
    t[0] = std::exp(x.value());
    for (std::size_t k = 1; k < t.size(); ++k) t[k] = t[k - 1] / static_cast<double>(k);
    return apply_univariate(x, t);
}

Jet log(const Jet& x) {
    const double c = x.value();
    if (c <= 0.0) throw PreconditionError("log of a jet with nonpositive constant term");
    auto t = taylor_buffer(x);
    t[0] = std::log(c);
    double p = 1.0;
    for (std::size_t k = 1; k < t.size(); ++k) {
        p /= c;
        t[k] = ((k % 2) ? 1.0 : -1.0) * p / static_cast<double>(k);
    }
    return apply_univariate(x, t);
}

Jet pow(const Jet& x, double p) {
    const double c = x.value();
    if (c <= 0.0) throw PreconditionError("real power of a jet with nonpositive constant term");
    auto t = taylor_buffer(x);
    t[0] = std::pow(c, p);
    for (std::size_t k = 1; k < t.size(); ++k) {
        t[k] = t[k - 1] * (p - static_cast<double>(k) + 1.0) / (static_cast<double>(k) * c);
    }
    return apply_univariate(x, t);
}

Jet sqrt(const Jet& x) { return pow(x, 0.5); }

Jet sin(const Jet& x) {
    const double s = std::sin(x.value());
    const double c = std::cos(x.value());
    const double cycle[4] = {s, c, -s, -c};
    auto t = taylor_buffer(x);
    double fact = 1.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (k > 0) fact *= static_cast<double>(k);
        t[k] = cycle[k % 4] / fact;
    }
    return apply_univariate(x, t);
}

Jet cos(const Jet& x) {
    const double s = std::sin(x.value());
    const double c = std::cos(x.value());
    const double cycle[4] = {c, -s, -c, s};
    auto t = taylor_buffer(x);
    double fact = 1.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (k > 0) fact *= static_cast<double>(k);
        t[k] = cycle[k % 4] / fact;
    }
    return apply_univariate(x, t);
}

// -------------------------------------------------------------------- JetMap

JetMap::JetMap(std::vector<Jet> components) : comps_(std::move(components)) {
    if (comps_.empty()) throw DimensionError("a jet map needs at least one component");
    for (const Jet& c : comps_) {
        if (c.value_dim() != 1) throw DimensionError("jet map components must be scalar jets");
        if (c.layout_ptr() != comps_.front().layout_ptr()) {
            throw DimensionError("jet map components must share dim_in and degree");
        }
    }
}

JetMap JetMap::identity(int dim, int degree) {
    std::vector<Jet> c;
    for (int i = 0; i < dim; ++i) c.push_back(Jet::variable(dim, degree, i));
    return JetMap(std::move(c));
}

JetMap JetMap::affine(const Eigen::VectorXd& offset, const Eigen::MatrixXd& linear, int degree) {
    if (offset.size() != linear.rows()) throw DimensionError("affine jet map: offset/linear mismatch");
    const int d = static_cast<int>(linear.cols());
    std::vector<Jet> c;
    for (int i = 0; i < linear.rows(); ++i) {
        Jet j = Jet::constant(d, degree, offset(i));
        if (degree >= 1) {
            for (int k = 0; k < d; ++k) j.coeff(static_cast<std::size_t>(1 + k)) = linear(i, k);
        }
        c.push_back(std::move(j));
    }
    return JetMap(std::move(c));
}

Eigen::VectorXd JetMap::constant_term() const {
    Eigen::VectorXd v(size());
    for (int i = 0; i < size(); ++i) v(i) = comps_[static_cast<std::size_t>(i)].value();
    return v;
}

Eigen::MatrixXd JetMap::linear_part() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size(), dim_in());
    if (degree() < 1) return a;
    for (int i = 0; i < size(); ++i) {
        for (int k = 0; k < dim_in(); ++k) a(i, k) = comps_[static_cast<std::size_t>(i)].coeff(static_cast<std::size_t>(1 + k));
    }
    return a;
}

JetMap JetMap::centered() const {
    JetMap out = *this;
    for (Jet& c : out.comps_) c.coeff(0) = 0.0;
    return out;
}

JetMap& JetMap::operator+=(const JetMap& other) {
    if (size() != other.size()) throw DimensionError("jet map sizes differ");
    for (int i = 0; i < size(); ++i) (*this)[i] += other[i];
    return *this;
}

JetMap& JetMap::operator-=(const JetMap& other) {
    if (size() != other.size()) throw DimensionError("jet map sizes differ");
    for (int i = 0; i < size(); ++i) (*this)[i] -= other[i];
    return *this;
}

JetMap truncate(const JetMap& f, int n) {
    std::vector<Jet> c;
    for (const Jet& j : f.components()) c.push_back(truncate(j, n));
    return JetMap(std::move(c));
}

double max_abs_difference(const JetMap& a, const JetMap& b) {
    if (a.size() != b.size()) throw DimensionError("compared jet maps differ in size");
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, max_abs_difference(a[i], b[i]));
    return m;
}

JetMap apply_linear(const Eigen::MatrixXd& a, const JetMap& f) {
    if (a.cols() != f.size()) throw DimensionError("linear map does not match jet map size");
    std::vector<Jet> c;
    for (int i = 0; i < a.rows(); ++i) {
        Jet s(f.dim_in(), f.degree());
        for (int j = 0; j < f.size(); ++j) {
            if (a(i, j) != 0.0) s.add_scaled(f[j], a(i, j));
        }
        c.push_back(std::move(s));
    }
    return JetMap(std::move(c));
}

// ---------------------------------------------------------------- composition

MonomialPowers::MonomialPowers(const JetMap& inner, int degree)
    : layout_(JetLayout::get(inner.size(), degree)) {
    for (const Jet& c : inner.components()) {
        if (c.value() != 0.0) throw PreconditionError("inner series must have zero constant term");
    }
    powers_.reserve(layout_->size());
    powers_.push_back(Jet::constant(inner.dim_in(), inner.degree(), 1.0));
    for (std::size_t r = 1; r < layout_->size(); ++r) {
        const MultiIndex& a = layout_->index(r);
        int v = 0;
        while (a[v] == 0) ++v;
        if (layout_->order(r) > inner.degree()) {
            powers_.emplace_back(inner.dim_in(), inner.degree());  // vanishes after truncation
        } else {
            powers_.push_back(powers_[layout_->lower(r, v)] * inner[v]);
        }
    }
}

Jet MonomialPowers::apply(const Jet& f) const {
    if (f.dim_in() != layout_->dim()) throw DimensionError("outer series has wrong input dimension");
    const Jet& one = powers_.front();
    const int w = f.value_dim();
    Jet out(one.dim_in(), one.degree(), w);
    const std::size_t n = std::min(f.num_monomials(), layout_->size());
    const std::size_t inner_size = one.num_monomials();
    auto oc = out.coefficients();
    for (std::size_t r = 0; r < n; ++r) {
        const auto pc = powers_[r].coefficients();
        for (int k = 0; k < w; ++k) {
            const double s = f.coeff(r, k);
            if (s == 0.0) continue;
            for (std::size_t m = 0; m < inner_size; ++m) oc[m * static_cast<std::size_t>(w) + static_cast<std::size_t>(k)] += s * pc[m];
        }
    }
    const int valid = std::min(f.degree(), one.degree());
    return valid < out.degree() ? truncate(out, valid) : out;
}

namespace {

JetMap prepare_inner(const JetMap& g, Recenter recenter) {
    if (recenter == Recenter::yes) return g.centered();
    for (const Jet& c : g.components()) {
        if (c.value() != 0.0) {
            throw PreconditionError("composition: inner map has a nonzero constant term (re-center not requested)");
        }
    }
    return g;
}

}  // namespace

Jet compose(const Jet& f, const JetMap& g, Recenter recenter) {
    if (f.dim_in() != g.size()) throw DimensionError("composition: outer input dimension != inner component count");
    const JetMap inner = prepare_inner(g, recenter);
    MonomialPowers powers(inner, std::min(f.degree(), g.degree()));
    return powers.apply(f);
}

JetMap compose(const JetMap& f, const JetMap& g, Recenter recenter) {
    if (f.dim_in() != g.size()) throw DimensionError("composition: outer input dimension != inner component count");
    const JetMap inner = prepare_inner(g, recenter);
    MonomialPowers powers(inner, std::min(f.degree(), g.degree()));
    std::vector<Jet> c;
    for (const Jet& fi : f.components()) c.push_back(powers.apply(fi));
    return JetMap(std::move(c));
}

JetMap invert(const JetMap& f, double max_condition) {
    const int d = f.dim_in();
    if (f.size() != d) throw DimensionError("only square jet maps can be inverted");
    const Eigen::VectorXd c0 = f.constant_term();
    if (c0.lpNorm<Eigen::Infinity>() != 0.0) throw PreconditionError("jet inversion requires f(0) = 0");
    const int n = f.degree();
    if (n < 1) throw PreconditionError("jet inversion requires degree >= 1");

    const Eigen::MatrixXd a = f.linear_part();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin <= 0.0 || sv(0) / smin > max_condition) {
        throw SingularError("jet inversion: linear part is singular or ill-conditioned");
    }
    const Eigen::MatrixXd ainv = a.inverse();

    const JetMap id = JetMap::identity(d, n);
    JetMap g = apply_linear(ainv, id);
    // Each pass fixes one more order of the inverse.
    for (int pass = 1; pass < n; ++pass) {
        JetMap defect = compose(f, g) - id;
        g -= apply_linear(ainv, defect);
    }
    return g;
}

}  // namespace isojet
