#pragma once

// Riemannian metrics given in a single chart, chart maps between such
// charts, pullbacks, and one-parameter families.

#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "isojet/error.hpp"
#include "isojet/jet_matrix.hpp"
#include "isojet/jets.hpp"
#include "isojet/linalg.hpp"

namespace isojet {

/// Axis-aligned box in chart coordinates.
struct Box {
    Vec lower;
    Vec upper;

    static Box cube(int dim, double half_width);

    int dim() const { return static_cast<int>(lower.size()); }
    bool contains(const Vec& p) const;
    Vec center() const { return 0.5 * (lower + upper); }
    /// Longest side.
    double scale() const { return (upper - lower).maxCoeff(); }
};

using RegionPredicate = std::function<bool(const Vec&)>;

class ChartMetric {
public:
    virtual ~ChartMetric() = default;

    int dim() const { return region_.dim(); }
    const Box& region() const { return region_; }
    const std::string& name() const { return name_; }

    /// Inside the box and, when present, inside the predicate.
    virtual bool contains(const Vec& p) const;

    /// g(p), symmetric positive definite.
    virtual Mat value(const Vec& p) const = 0;

    /// Taylor expansion of g about p in displacement variables, to `order`.
    /// The default uses tensor-product finite differences on a lattice.
    virtual JetMatrix expand(const Vec& p, int order) const;

    /// d g / d x_k at p for k = 0..dim-1. The default is a fourth-order
    /// central difference with step 1e-4 * region scale.
    virtual std::vector<Mat> first_partials(const Vec& p) const;

    /// True when expand() is exact Taylor arithmetic rather than finite differences.
    virtual bool analytic() const { return false; }

    void require_inside(const Vec& p, const char* what) const;

    /// Lattice step used by the finite-difference expand().
    double expansion_step() const { return expansion_step_; }
    void set_expansion_step(double h) { expansion_step_ = h; }

protected:
    ChartMetric(Box region, std::string name, RegionPredicate inside = {});

    Box region_;
    std::string name_;
    RegionPredicate inside_;
    double expansion_step_ = 1e-2;
};

using MetricPtr = std::shared_ptr<const ChartMetric>;

/// Metric from a functor templated on the scalar type:
///   template <class S> void operator()(std::span<const S> x, std::span<S> g) const;
/// writing the row-major d x d matrix. It is instantiated with double and with
/// Jet, which gives exact Taylor expansions.
template <class Fn>
class AnalyticMetric final : public ChartMetric {
public:
    AnalyticMetric(Box region, Fn fn, std::string name, RegionPredicate inside = {})
        : ChartMetric(std::move(region), std::move(name), std::move(inside)), fn_(std::move(fn)) {}

    Mat value(const Vec& p) const override {
        const int d = dim();
        std::vector<double> x(p.data(), p.data() + d);
        std::vector<double> g(static_cast<std::size_t>(d * d));
        fn_(std::span<const double>(x), std::span<double>(g));
        Mat m(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) m(i, j) = g[static_cast<std::size_t>(i * d + j)];
        }
        return m;
    }

    JetMatrix expand(const Vec& p, int order) const override {
        const int d = dim();
        std::vector<Jet> x;
        x.reserve(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) x.push_back(Jet::variable(d, order, i, p(i)));
        std::vector<Jet> g(static_cast<std::size_t>(d * d));
        fn_(std::span<const Jet>(x), std::span<Jet>(g));
        JetMatrix m(d, d, d, order);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) m(i, j) = std::move(g[static_cast<std::size_t>(i * d + j)]);
        }
        return m;
    }

    std::vector<Mat> first_partials(const Vec& p) const override {
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

    bool analytic() const override { return true; }

private:
    Fn fn_;
};

template <class Fn>
MetricPtr make_analytic_metric(Box region, Fn fn, std::string name, RegionPredicate inside = {}) {
    return std::make_shared<AnalyticMetric<Fn>>(std::move(region), std::move(fn), std::move(name), std::move(inside));
}

/// Metric known only through point values (finite-difference derivatives).
MetricPtr make_sampled_metric(Box region, std::function<Mat(const Vec&)> g, std::string name,
                              RegionPredicate inside = {});

// ------------------------------------------------------------------ chart maps

/// Smooth map between charts of equal dimension.
class ChartMap {
public:
    virtual ~ChartMap() = default;
    virtual int dim() const = 0;
    virtual Vec apply(const Vec& x) const = 0;
    /// Taylor expansion about x in displacement variables.
    virtual JetMap expand(const Vec& x, int order) const = 0;
    Mat jacobian(const Vec& x) const { return expand(x, 1).linear_part(); }
};

using MapPtr = std::shared_ptr<const ChartMap>;

/// Map from a functor templated on the scalar type:
///   template <class S> void operator()(std::span<const S> x, std::span<S> y) const;
template <class Fn>
class AnalyticMap final : public ChartMap {
public:
    AnalyticMap(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}

    int dim() const override { return dim_; }

    Vec apply(const Vec& x) const override {
        std::vector<double> in(x.data(), x.data() + dim_);
        std::vector<double> out(static_cast<std::size_t>(dim_));
        fn_(std::span<const double>(in), std::span<double>(out));
        return Eigen::Map<Vec>(out.data(), dim_);
    }

    JetMap expand(const Vec& x, int order) const override {
        std::vector<Jet> in;
        for (int i = 0; i < dim_; ++i) in.push_back(Jet::variable(dim_, order, i, x(i)));
        std::vector<Jet> out(static_cast<std::size_t>(dim_));
        fn_(std::span<const Jet>(in), std::span<Jet>(out));
        return JetMap(std::move(out));
    }

private:
    int dim_;
    Fn fn_;
};

template <class Fn>
MapPtr make_analytic_map(int dim, Fn fn) {
    return std::make_shared<AnalyticMap<Fn>>(dim, std::move(fn));
}

/// x -> offset + linear * x
MapPtr make_affine_map(const Mat& linear, const Vec& offset);

/// Complex Moebius map z -> (a z + b) / (c z + d) on R^2 = C.
struct MobiusCoefficients {
    std::complex<double> a{1.0, 0.0};
    std::complex<double> b{0.0, 0.0};
    std::complex<double> c{0.0, 0.0};
    std::complex<double> d{1.0, 0.0};

    MobiusCoefficients inverse() const { return {d, -b, -c, a}; }
    std::complex<double> operator()(std::complex<double> z) const { return (a * z + b) / (c * z + d); }
    std::complex<double> derivative(std::complex<double> z) const {
        const auto den = c * z + d;
        return (a * d - b * c) / (den * den);
    }
    /// Disc automorphism z -> e^{i theta} (z - w) / (1 - conj(w) z).
    static MobiusCoefficients disc_automorphism(double theta, std::complex<double> w);
};

MapPtr make_mobius_map(const MobiusCoefficients& m);

/// Pullback phi^* g with phi mapping this chart into the chart of `base`.
class PullbackMetric final : public ChartMetric {
public:
    PullbackMetric(MetricPtr base, MapPtr phi, Box region, std::string name, RegionPredicate inside = {});

    bool contains(const Vec& p) const override;
    Mat value(const Vec& p) const override;
    JetMatrix expand(const Vec& p, int order) const override;
    std::vector<Mat> first_partials(const Vec& p) const override;
    bool analytic() const override { return base_->analytic(); }

    const MetricPtr& base() const { return base_; }
    const MapPtr& map() const { return phi_; }

private:
    MetricPtr base_;
    MapPtr phi_;
};

/// Pushforward f_* g = (f^{-1})^* g, given the inverse map.
MetricPtr make_pushforward(MetricPtr g, MapPtr f_inverse, Box region, std::string name, RegionPredicate inside = {});

// -------------------------------------------------------------------- families

/// t -> g_t on a fixed chart region.
class MetricFamily {
public:
    using Generator = std::function<MetricPtr(double)>;

    MetricFamily(double t_min, double t_max, Generator at, std::string name, bool cache = false);

    double t_min() const { return t_min_; }
    double t_max() const { return t_max_; }
    const std::string& name() const { return name_; }

    /// Throws PreconditionError outside [t_min, t_max].
    MetricPtr at(double t) const;

    static MetricFamily constant(MetricPtr g, double t_min = -1.0, double t_max = 1.0);

private:
    double t_min_;
    double t_max_;
    Generator gen_;
    std::string name_;
    bool cache_;
    mutable std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
    mutable std::shared_ptr<std::map<double, MetricPtr>> memo_ = std::make_shared<std::map<double, MetricPtr>>();
};

/// Taylor jets of g composed with a jet map p(u) whose constant term is the expansion point.
JetMatrix metric_along(const ChartMetric& g, const JetMap& position, int order);

}  // namespace isojet
