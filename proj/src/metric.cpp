#include "isojet/metric.hpp"

#include <cmath>

#include "isojet/complex_generic.hpp"
#include "isojet/finite_difference.hpp"

namespace isojet {

Box Box::cube(int dim, double half_width) {
    return {Vec::Constant(dim, -half_width), Vec::Constant(dim, half_width)};
}

bool Box::contains(const Vec& p) const {
    if (p.size() != lower.size()) return false;
    for (int i = 0; i < p.size(); ++i) {
        if (!(p(i) > lower(i) && p(i) < upper(i))) return false;
    }
    return true;
}

// ---------------------------------------------------------------- ChartMetric

ChartMetric::ChartMetric(Box region, std::string name, RegionPredicate inside)
    : region_(std::move(region)), name_(std::move(name)), inside_(std::move(inside)) {
    if (region_.dim() < 1 || region_.upper.size() != region_.lower.size()) {
        throw DimensionError("metric region must be a nonempty box");
    }
}

bool ChartMetric::contains(const Vec& p) const {
    if (!region_.contains(p)) return false;
    return !inside_ || inside_(p);
}

void ChartMetric::require_inside(const Vec& p, const char* what) const {
    if (!contains(p)) throw RegionError(std::string(what) + ": point outside the metric region of " + name_);
}

JetMatrix ChartMetric::expand(const Vec& p, int order) const {
    const int d = dim();
    const double h = expansion_step_;
    const int half = std::max(2, (order + 5) / 2);
    const int width = 2 * half + 1;
    std::vector<double> nodes(static_cast<std::size_t>(width));
    for (int k = 0; k < width; ++k) nodes[static_cast<std::size_t>(k)] = (k - half) * h;
    const auto w = fornberg_weights(0.0, nodes, order);

    // sample g on the full lattice once
    std::size_t count = 1;
    for (int i = 0; i < d; ++i) count *= static_cast<std::size_t>(width);
    std::vector<Mat> samples(count);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t s = 0; s < count; ++s) {
        std::size_t rem = s;
        Vec x = p;
        for (int i = 0; i < d; ++i) {
            idx[static_cast<std::size_t>(i)] = static_cast<int>(rem % static_cast<std::size_t>(width));
            rem /= static_cast<std::size_t>(width);
            x(i) += nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
        }
        samples[s] = value(x);
    }

    JetMatrix out(d, d, d, order);
    const JetLayout& lay = out(0, 0).layout();
    for (std::size_t r = 0; r < lay.size(); ++r) {
        const MultiIndex& a = lay.index(r);
        double factorial = 1.0;
        for (int i = 0; i < d; ++i) {
            for (int k = 2; k <= a[i]; ++k) factorial *= k;
        }
        Mat acc = Mat::Zero(d, d);
        for (std::size_t s = 0; s < count; ++s) {
            std::size_t rem = s;
            double weight = 1.0;
            for (int i = 0; i < d && weight != 0.0; ++i) {
                const auto k = rem % static_cast<std::size_t>(width);
                rem /= static_cast<std::size_t>(width);
                weight *= w[static_cast<std::size_t>(a[i])][k];
            }
            if (weight != 0.0) acc += weight * samples[s];
        }
        acc /= factorial;
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) out(i, j).coeff(r) = 0.5 * (acc(i, j) + acc(j, i));
        }
    }
    return out;
}

std::vector<Mat> ChartMetric::first_partials(const Vec& p) const {
    const int d = dim();
    const double h = 1e-4 * region_.scale();
    std::vector<Mat> out;
    for (int k = 0; k < d; ++k) {
        Vec e = Vec::Zero(d);
        e(k) = h;
        out.push_back((value(p - 2 * e) - 8 * value(p - e) + 8 * value(p + e) - value(p + 2 * e)) / (12 * h));
    }
    return out;
}

namespace {

class SampledMetric final : public ChartMetric {
public:
    SampledMetric(Box region, std::function<Mat(const Vec&)> g, std::string name, RegionPredicate inside)
        : ChartMetric(std::move(region), std::move(name), std::move(inside)), g_(std::move(g)) {}

    Mat value(const Vec& p) const override { return g_(p); }

private:
    std::function<Mat(const Vec&)> g_;
};

}  // namespace

MetricPtr make_sampled_metric(Box region, std::function<Mat(const Vec&)> g, std::string name, RegionPredicate inside) {
    return std::make_shared<SampledMetric>(std::move(region), std::move(g), std::move(name), std::move(inside));
}

// ---------------------------------------------------------------- chart maps

namespace {

class AffineMap final : public ChartMap {
public:
    AffineMap(Mat linear, Vec offset) : a_(std::move(linear)), b_(std::move(offset)) {
        if (a_.rows() != a_.cols() || a_.rows() != b_.size()) throw DimensionError("affine map must be square");
    }
    int dim() const override { return static_cast<int>(b_.size()); }
    Vec apply(const Vec& x) const override { return b_ + a_ * x; }
    JetMap expand(const Vec& x, int order) const override { return JetMap::affine(apply(x), a_, order); }

private:
    Mat a_;
    Vec b_;
};

struct MobiusFn {
    MobiusCoefficients m;

    template <class S>
    void operator()(std::span<const S> x, std::span<S> y) const {
        const S zero = x[0] * 0.0;
        const Cplx<S> z{x[0], x[1]};
        const Cplx<S> num = m.a * z + m.b;
        const Cplx<S> den = m.c * z + m.d;
        const Cplx<S> w = num / den;
        y[0] = w.re + zero;
        y[1] = w.im + zero;
    }
};

}  // namespace

MapPtr make_affine_map(const Mat& linear, const Vec& offset) { return std::make_shared<AffineMap>(linear, offset); }

MobiusCoefficients MobiusCoefficients::disc_automorphism(double theta, std::complex<double> w) {
    const std::complex<double> rot = std::polar(1.0, theta);
    return {rot, -rot * w, -std::conj(w), {1.0, 0.0}};
}

MapPtr make_mobius_map(const MobiusCoefficients& m) { return make_analytic_map(2, MobiusFn{m}); }

// ------------------------------------------------------------------ pullbacks

PullbackMetric::PullbackMetric(MetricPtr base, MapPtr phi, Box region, std::string name, RegionPredicate inside)
    : ChartMetric(std::move(region), std::move(name), std::move(inside)), base_(std::move(base)), phi_(std::move(phi)) {
    if (base_->dim() != phi_->dim() || phi_->dim() != dim()) throw DimensionError("pullback: dimensions differ");
}

bool PullbackMetric::contains(const Vec& p) const {
    return ChartMetric::contains(p) && base_->contains(phi_->apply(p));
}

Mat PullbackMetric::value(const Vec& p) const {
    const JetMap f = phi_->expand(p, 1);
    const Mat j = f.linear_part();
    return j.transpose() * base_->value(f.constant_term()) * j;
}

JetMatrix metric_along(const ChartMetric& g, const JetMap& position, int order) {
    const JetMap p = truncate(position, order);
    const JetMatrix g0 = g.expand(p.constant_term(), order);
    MonomialPowers powers(p.centered(), order);
    return g0.apply(powers);
}

JetMatrix PullbackMetric::expand(const Vec& p, int order) const {
    const JetMap f = phi_->expand(p, order + 1);
    const JetMatrix j = jacobian(f);  // degree `order`
    const JetMatrix g = metric_along(*base_, f, order);
    return j.transpose() * g * j;
}

std::vector<Mat> PullbackMetric::first_partials(const Vec& p) const {
    const JetMatrix e = expand(p, 1);
    const int d = dim();
    std::vector<Mat> out(static_cast<std::size_t>(d), Mat(d, d));
    for (int k = 0; k < d; ++k) {
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(k)](i, j) = e(i, j).coeff(static_cast<std::size_t>(1 + k));
        }
    }
    return out;
}

MetricPtr make_pushforward(MetricPtr g, MapPtr f_inverse, Box region, std::string name, RegionPredicate inside) {
    return std::make_shared<PullbackMetric>(std::move(g), std::move(f_inverse), std::move(region), std::move(name),
                                            std::move(inside));
}

// ------------------------------------------------------------------- families

MetricFamily::MetricFamily(double t_min, double t_max, Generator at, std::string name, bool cache)
    : t_min_(t_min), t_max_(t_max), gen_(std::move(at)), name_(std::move(name)), cache_(cache) {
    if (!(t_min <= t_max)) throw PreconditionError("metric family needs t_min <= t_max");
}

MetricPtr MetricFamily::at(double t) const {
    if (t < t_min_ || t > t_max_) throw PreconditionError("parameter outside the family's t-domain");
    if (!cache_) return gen_(t);
    {
        std::lock_guard lock(*mutex_);
        if (auto it = memo_->find(t); it != memo_->end()) return it->second;
    }
    MetricPtr g = gen_(t);
    std::lock_guard lock(*mutex_);
    return memo_->emplace(t, std::move(g)).first->second;
}

MetricFamily MetricFamily::constant(MetricPtr g, double t_min, double t_max) {
    std::string name = g->name();
    return MetricFamily(t_min, t_max, [g = std::move(g)](double) { return g; }, "constant(" + name + ")");
}

}  // namespace isojet
