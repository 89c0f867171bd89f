#include "isojet/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <variant>

#include <yaml-cpp/yaml.h>

#include "isojet/bergman.hpp"
#include "isojet/builtin_metrics.hpp"
#include "isojet/error.hpp"
#include "isojet/family_tracker.hpp"
#include "isojet/flip_family.hpp"
#include "isojet/frame.hpp"
#include "isojet/jets_json.hpp"
#include "isojet/parallel.hpp"

namespace isojet {

using json = nlohmann::json;

// ------------------------------------------------------------------ yaml input

namespace {

// Map node reader that remembers which keys were consumed, so unknown keys
// can be reported instead of silently ignored.
class Table {
public:
    Table(YAML::Node node, std::string file, std::string what)
        : node_(std::move(node)), file_(std::move(file)), what_(std::move(what)) {
        if (!node_.IsMap()) fail(node_, what_ + " must be a mapping");
    }

    [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
        const YAML::Mark m = at.Mark();
        std::ostringstream out;
        out << file_;
        if (m.line >= 0) out << ':' << m.line + 1 << ':' << m.column + 1;
        out << ": " << msg;
        throw ParseError(out.str());
    }

    const std::string& file() const { return file_; }
    const YAML::Node& node() const { return node_; }

    bool has(const std::string& key) {
        used_.insert(key);
        return static_cast<bool>(node_[key]);
    }

    YAML::Node raw(const std::string& key) {
        used_.insert(key);
        const YAML::Node n = node_[key];
        if (!n) fail(node_, what_ + ": missing '" + key + "'");
        return n;
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) fail(node_, what_ + ": missing '" + key + "'");
            return *fallback;
        }
        return as_number(node_[key], key);
    }

    double positive(const std::string& key, std::optional<double> fallback = std::nullopt) {
        const double v = number(key, fallback);
        if (!(v > 0.0)) fail(has(key) ? node_[key] : node_, what_ + ": '" + key + "' must be positive");
        return v;
    }

    int integer(const std::string& key, std::optional<int> fallback = std::nullopt) {
        const double v = number(key, fallback ? std::optional<double>(*fallback) : std::nullopt);
        if (v != std::floor(v) || std::abs(v) > 1e9) fail(node_[key], what_ + ": '" + key + "' must be an integer");
        return static_cast<int>(v);
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) fail(node_, what_ + ": missing '" + key + "'");
            return *fallback;
        }
        const YAML::Node n = node_[key];
        if (!n.IsScalar()) fail(n, what_ + ": '" + key + "' must be a string");
        return n.as<std::string>();
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const YAML::Node n = node_[key];
        try {
            return n.as<bool>();
        } catch (const YAML::Exception&) {
            fail(n, what_ + ": '" + key + "' must be true or false");
        }
    }

    std::vector<double> numbers(const YAML::Node& n, const std::string& key) const {
        if (!n.IsSequence()) fail(n, what_ + ": '" + key + "' must be a list of numbers");
        std::vector<double> out;
        for (const auto& e : n) out.push_back(as_number(e, key));
        return out;
    }

    Vec vector(const std::string& key, int size) {
        const YAML::Node n = raw(key);
        const std::vector<double> v = numbers(n, key);
        if (size > 0 && static_cast<int>(v.size()) != size) {
            fail(n, what_ + ": '" + key + "' must have " + std::to_string(size) + " entries");
        }
        return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    std::vector<Vec> points(const YAML::Node& n, const std::string& key, int dim) const {
        if (!n.IsSequence()) fail(n, what_ + ": '" + key + "' must be a list of points");
        std::vector<Vec> out;
        for (const auto& e : n) {
            const std::vector<double> v = numbers(e, key);
            if (static_cast<int>(v.size()) != dim) fail(e, what_ + ": points in '" + key + "' must have " + std::to_string(dim) + " coordinates");
            out.push_back(Eigen::Map<const Vec>(v.data(), dim));
        }
        return out;
    }

    std::vector<Vec> points(const std::string& key, int dim) { return points(raw(key), key, dim); }

    Table table(const std::string& key) { return Table(raw(key), file_, what_ + "." + key); }

    void finish() const {
        for (const auto& kv : node_) {
            const std::string k = kv.first.as<std::string>();
            if (!used_.contains(k)) fail(kv.first, what_ + ": unknown key '" + k + "'");
        }
    }

private:
    double as_number(const YAML::Node& n, const std::string& key) const {
        if (!n.IsScalar()) fail(n, what_ + ": '" + key + "' must be a number");
        try {
            return n.as<double>();
        } catch (const YAML::Exception&) {
            fail(n, what_ + ": '" + key + "' must be a number");
        }
    }

    YAML::Node node_;
    std::string file_;
    std::string what_;
    std::set<std::string> used_;
};

std::string location(const Table& t) {
    return t.file() + ":" + std::to_string(t.node().Mark().line + 1);
}

}  // namespace

// ------------------------------------------------------------------ typed specs

namespace {

/// Affine x -> A x + b, or a Moebius map of the plane.
struct MapSpec {
    bool mobius = false;
    MobiusCoefficients m;
    Mat linear;
    Vec offset;

    Vec apply(const Vec& x) const {
        if (!mobius) return linear * x + offset;
        const auto w = m({x(0), x(1)});
        Vec y(2);
        y << w.real(), w.imag();
        return y;
    }
    Mat jacobian(const Vec& x) const {
        if (!mobius) return linear;
        const auto c = m.derivative({x(0), x(1)});
        Mat j(2, 2);
        j << c.real(), -c.imag(), c.imag(), c.real();
        return j;
    }
    MapPtr inverse_map() const {
        if (mobius) return make_mobius_map(m.inverse());
        const Mat inv = linear.inverse();
        return make_affine_map(inv, -inv * offset);
    }
    json to_json() const {
        if (mobius) {
            return {{"kind", "mobius"},
                    {"a", {m.a.real(), m.a.imag()}},
                    {"b", {m.b.real(), m.b.imag()}},
                    {"c", {m.c.real(), m.c.imag()}},
                    {"d", {m.d.real(), m.d.imag()}}};
        }
        json lin = json::array();
        for (int i = 0; i < linear.rows(); ++i) {
            json row = json::array();
            for (int j = 0; j < linear.cols(); ++j) row.push_back(linear(i, j));
            lin.push_back(row);
        }
        return {{"kind", "affine"}, {"linear", lin}, {"offset", std::vector<double>(offset.data(), offset.data() + offset.size())}};
    }
};

Mat rotation2(double a) {
    Mat r(2, 2);
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return r;
}

MetricSpec parse_metric(Table t) {
    MetricSpec spec;
    spec.id = t.text("id");
    const auto ids = builtin_metric_ids();
    if (std::find(ids.begin(), ids.end(), spec.id) == ids.end()) t.fail(t.raw("id"), "unknown metric id '" + spec.id + "'");
    if (t.has("params")) {
        Table p = t.table("params");
        for (const auto& kv : p.node()) {
            const std::string k = kv.first.as<std::string>();
            const YAML::Node v = kv.second;
            if (v.IsSequence()) {
                spec.params[k] = p.numbers(v, k);
            } else {
                spec.params[k] = {p.number(k)};
            }
            (void)p.has(k);
        }
    }
    if (t.has("source")) spec.source = std::make_shared<MetricSpec>(parse_metric(t.table("source")));
    t.finish();
    try {
        (void)make_builtin_metric(spec);
    } catch (const Error& e) {
        t.fail(t.node(), e.what());
    }
    return spec;
}

MapSpec parse_map(Table t, int dim) {
    MapSpec m;
    if (t.has("mobius")) {
        if (dim != 2) t.fail(t.node(), "mobius maps need a 2-dimensional chart");
        Table mt = t.table("mobius");
        const double theta = mt.number("theta", 0.0);
        const Vec w = mt.has("w") ? mt.vector("w", 2) : Vec::Zero(2);
        if (w.norm() >= 1.0) mt.fail(mt.node(), "mobius: |w| must be below 1");
        mt.finish();
        m.mobius = true;
        m.m = MobiusCoefficients::disc_automorphism(theta, {w(0), w(1)});
    } else {
        m.linear = Mat::Identity(dim, dim);
        if (t.has("rotation")) {
            if (dim != 2) t.fail(t.raw("rotation"), "'rotation' needs a 2-dimensional chart");
            m.linear = rotation2(t.number("rotation"));
        }
        if (t.has("reflection")) {
            if (t.flag("reflection", false)) {
                Mat r = Mat::Identity(dim, dim);
                r(dim - 1, dim - 1) = -1.0;
                m.linear = m.linear * r;
            }
        }
        if (t.has("linear")) {
            const auto rows = t.points("linear", dim);
            if (static_cast<int>(rows.size()) != dim) t.fail(t.raw("linear"), "'linear' must be a square matrix");
            for (int i = 0; i < dim; ++i) m.linear.row(i) = rows[static_cast<std::size_t>(i)].transpose();
        }
        m.offset = t.has("translation") ? t.vector("translation", dim) : Vec::Zero(dim);
        if (std::abs(m.linear.determinant()) < 1e-12) t.fail(t.node(), "map is not invertible");
    }
    t.finish();
    return m;
}

MetricPtr pushforward(const MetricPtr& g, const MapSpec& f) {
    const MapPtr inv = f.inverse_map();
    Box region = g->region();
    if (!f.mobius) {
        // bounding box of the image of the region
        const int d = g->dim();
        Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
        Vec hi = -lo;
        for (int corner = 0; corner < (1 << d); ++corner) {
            Vec x(d);
            for (int i = 0; i < d; ++i) x(i) = (corner >> i) & 1 ? region.upper(i) : region.lower(i);
            const Vec y = f.apply(x);
            lo = lo.cwiseMin(y);
            hi = hi.cwiseMax(y);
        }
        region = Box{lo, hi};
    }
    return make_pushforward(g, inv, region, "pushforward(" + g->name() + ")",
                            [g, inv](const Vec& x) { return g->contains(inv->apply(x)); });
}

struct Grid {
    std::vector<double> t;
};

Grid parse_grid(Table& parent) {
    Grid g;
    const YAML::Node n = parent.raw("grid");
    if (n.IsSequence()) {
        g.t = parent.numbers(n, "grid");
    } else {
        Table t(n, parent.file(), "grid");
        const double a = t.number("from");
        const double b = t.number("to");
        const int count = t.integer("count");
        if (count < 2 || !(b > a)) t.fail(n, "grid: need count >= 2 and to > from");
        for (int k = 0; k < count; ++k) g.t.push_back(a + (b - a) * k / (count - 1));
        t.finish();
    }
    if (g.t.empty()) parent.fail(n, "grid is empty");
    return g;
}

void parse_tracker(Table t, TrackerOptions& opt) {
    opt.degree = t.integer("degree", opt.degree);
    opt.delta = t.positive("delta", opt.delta);
    opt.residual_tolerance = t.positive("residual_tolerance", opt.residual_tolerance);
    opt.accept_residual = t.positive("accept_residual", opt.accept_residual);
    opt.max_iterations = t.integer("max_iterations", opt.max_iterations);
    opt.max_halvings = t.integer("max_halvings", opt.max_halvings);
    opt.jacobian_step = t.positive("jacobian_step", opt.jacobian_step);
    opt.rank_threshold = t.positive("rank_threshold", opt.rank_threshold);
    opt.jump_threshold = t.positive("jump_threshold", opt.jump_threshold);
    opt.rate_floor = t.positive("rate_floor", opt.rate_floor);
    if (opt.degree < 1 || opt.degree > opt.invariants.max_degree) t.fail(t.node(), "tracker.degree out of range");
    t.finish();
}

/// Named limits from an `expect` table; each key is known to the command.
struct Limits {
    std::map<std::string, double> values;
    std::optional<std::string> verdict;
    std::optional<bool> flagged_adjacent;
    std::optional<bool> rank_deficient;

    bool has(const std::string& k) const { return values.contains(k); }
    double at(const std::string& k) const { return values.at(k); }
};

Limits parse_limits(Table& parent, const std::vector<std::string>& keys) {
    Limits l;
    if (!parent.has("expect")) return l;
    Table t = parent.table("expect");
    for (const std::string& k : keys) {
        if (!t.has(k)) continue;
        if (k == "verdict") {
            const std::string v = t.text(k);
            if (v != "match" && v != "mismatch") t.fail(t.raw(k), "expect.verdict must be match or mismatch");
            l.verdict = v;
        } else if (k == "flagged_adjacent") {
            l.flagged_adjacent = t.flag(k, true);
        } else if (k == "rank_deficient") {
            l.rank_deficient = t.flag(k, true);
        } else if (k == "rank_full_by") {
            l.values[k] = t.integer(k);
        } else {
            l.values[k] = t.positive(k);
        }
    }
    t.finish();
    return l;
}

std::vector<Mat> parse_rotations(Table& t, std::size_t count, int dim) {
    std::vector<Mat> seeds(count, Mat::Identity(dim, dim));
    if (!t.has("rotations")) return seeds;
    const YAML::Node n = t.raw("rotations");
    const std::vector<double> a = t.numbers(n, "rotations");
    if (dim != 2) t.fail(n, "'rotations' needs a 2-dimensional chart");
    if (a.size() != count) t.fail(n, "'rotations' must have one angle per point");
    for (std::size_t i = 0; i < count; ++i) seeds[i] = rotation2(a[i]);
    return seeds;
}

struct InvariantsSpec {
    MetricSpec metric;
    std::vector<Vec> points;
    std::vector<Mat> seeds;
    int random_frames = 0;
    double random_radius = 0.2;
    int degree = 3;
    double delta = 0.3;
    std::optional<double> curvature;
    std::vector<int> rank_degrees;
    double rank_threshold = 1e-6;
    Limits expect;
};

struct CheckSpec {
    MetricSpec metric;
    std::optional<MetricSpec> target_metric;
    std::optional<MapSpec> target_map;
    std::vector<Vec> points;
    std::vector<Mat> seeds;
    int degree = 3;
    double delta = 0.3;
    double tol = 1e-6;
    int overlap_samples = 50;
    Limits expect;
};

struct PropagateSpec {
    MetricSpec metric;
    MapSpec target_map;
    Vec base;
    std::vector<std::vector<Vec>> paths;
    std::vector<Vec> global_points;
    double step = 0.1;
    Limits expect;
};

struct MovingBump {
    Vec center;
    Vec velocity;
    double amplitude = 0.0;
    double width = 1.0;
};

struct DomainConfig {
    std::string id;
    std::map<std::string, double> params;
    std::string expression;
    QuadratureConfig quad;
};

struct FamilySpec {
    std::string kind;  // constant, moving_bumps, bergman
    MetricSpec metric;
    std::vector<MovingBump> bumps;
    double half_width = 2.0;
    double t_min = -1.0;
    double t_max = 1.0;
    DomainConfig domain;
    int kernel_degree = 20;
};

struct TrackSpec {
    FamilySpec source;
    MapSpec transform;
    std::vector<Vec> points;
    Grid grid;
    double t0 = 0.0;
    TrackerOptions tracker;
    Limits expect;
};

struct BergmanSpec {
    DomainConfig domain;
    double t = 0.0;
    double t_min = -1.0;
    double t_max = 1.0;
    int degree = 20;
    std::vector<Vec> points;
    int random_points = 0;
    std::string oracle = "none";
    std::optional<MobiusCoefficients> mobius;
    bool pullback = false;
    double pullback_t0 = 0.0;
    int pullback_degree = 12;
    Vec pullback_point;
    std::vector<double> steps;
    Limits expect;
};

struct DemoSpec {
    FlipOptions flip;
    std::vector<Vec> points;
    int count = 40;
    bool cross = true;
    TrackerOptions tracker;
    Limits expect;
};

}  // namespace

struct ScenarioSpec {
    std::variant<InvariantsSpec, CheckSpec, PropagateSpec, TrackSpec, BergmanSpec, DemoSpec> body;
};

namespace {

DomainConfig parse_domain(Table t) {
    DomainConfig d;
    d.id = t.text("id");
    const auto ids = builtin_domain_ids();
    if (std::find(ids.begin(), ids.end(), d.id) == ids.end()) t.fail(t.raw("id"), "unknown domain id '" + d.id + "'");
    if (t.has("params")) {
        Table p = t.table("params");
        for (const auto& kv : p.node()) {
            const std::string k = kv.first.as<std::string>();
            d.params[k] = p.number(k);
        }
    }
    d.expression = t.text("expression", "");
    if (t.has("quadrature")) {
        Table q = t.table("quadrature");
        const std::string method = q.text("method", "automatic");
        if (method == "automatic") {
            d.quad.method = QuadratureConfig::Method::automatic;
        } else if (method == "polar") {
            d.quad.method = QuadratureConfig::Method::polar;
        } else if (method == "qmc") {
            d.quad.method = QuadratureConfig::Method::qmc;
        } else {
            q.fail(q.raw("method"), "quadrature.method must be automatic, polar or qmc");
        }
        d.quad.qmc_nodes = static_cast<std::size_t>(q.integer("qmc_nodes", static_cast<int>(d.quad.qmc_nodes)));
        d.quad.qmc_offset = q.number("qmc_offset", d.quad.qmc_offset);
        d.quad.radial_nodes = q.integer("radial_nodes", d.quad.radial_nodes);
        d.quad.angular_nodes = q.integer("angular_nodes", d.quad.angular_nodes);
        q.finish();
    }
    t.finish();
    return d;
}

DomainFamily make_domain(const DomainConfig& d, double t_min, double t_max) {
    DomainFamily f = make_builtin_domain(d.id, d.params, d.expression, t_min, t_max);
    // keep the family's own defaults unless the scenario set quadrature
    f.quad = d.quad;
    return f;
}

void check_domain(Table& t, const DomainConfig& d, double t_min, double t_max) {
    try {
        const DomainFamily f = make_domain(d, t_min, t_max);
        (void)validate_domain(f.at(t_min));
        (void)validate_domain(f.at(t_max));
    } catch (const Error& e) {
        t.fail(t.node(), e.what());
    }
}

FamilySpec parse_family(Table t) {
    FamilySpec f;
    f.kind = t.text("family");
    if (t.has("t_range")) {
        const YAML::Node n = t.raw("t_range");
        const auto r = t.numbers(n, "t_range");
        if (r.size() != 2 || !(r[1] > r[0])) t.fail(n, "t_range must be [t_min, t_max] with t_max > t_min");
        f.t_min = r[0];
        f.t_max = r[1];
    }
    if (f.kind == "constant") {
        f.metric = parse_metric(t.table("metric"));
    } else if (f.kind == "moving_bumps") {
        f.half_width = t.positive("half_width", 2.0);
        const YAML::Node list = t.raw("bumps");
        if (!list.IsSequence() || list.size() == 0) t.fail(list, "bumps must be a non-empty list");
        for (const auto& b : list) {
            Table bt(b, t.file(), "bump");
            MovingBump mb;
            mb.center = bt.vector("center", 2);
            mb.velocity = bt.has("velocity") ? bt.vector("velocity", 2) : Vec::Zero(2);
            mb.amplitude = bt.number("amplitude");
            mb.width = bt.positive("width");
            bt.finish();
            f.bumps.push_back(mb);
        }
    } else if (f.kind == "bergman") {
        f.domain = parse_domain(t.table("domain"));
        f.kernel_degree = t.integer("kernel_degree", 20);
        if (f.kernel_degree < 1) t.fail(t.raw("kernel_degree"), "kernel_degree must be positive");
        check_domain(t, f.domain, f.t_min, f.t_max);
    } else {
        t.fail(t.raw("family"), "unknown family '" + f.kind + "' (constant, moving_bumps, bergman)");
    }
    t.finish();
    return f;
}

int family_dim(const FamilySpec& f) {
    if (f.kind == "constant") return make_builtin_metric(f.metric)->dim();
    if (f.kind == "bergman") return 2 * make_domain(f.domain, f.t_min, f.t_max).dim();
    return 2;
}

InvariantsSpec parse_invariants(Table& t) {
    InvariantsSpec s;
    s.metric = parse_metric(t.table("metric"));
    const int d = make_builtin_metric(s.metric)->dim();
    s.points = t.has("points") ? t.points("points", d) : std::vector<Vec>{};
    s.seeds = parse_rotations(t, s.points.size(), d);
    s.random_frames = t.integer("random_frames", 0);
    s.random_radius = t.positive("random_radius", 0.2);
    if (s.points.empty() && s.random_frames == 0) t.fail(t.node(), "invariants: need points or random_frames");
    s.degree = t.integer("degree", 3);
    if (s.degree < 0 || s.degree > 5) t.fail(t.raw("degree"), "degree must be between 0 and 5");
    s.delta = t.positive("delta", 0.3);
    if (t.has("curvature")) s.curvature = t.number("curvature");
    if (t.has("rank")) {
        Table r = t.table("rank");
        const YAML::Node n = r.raw("degrees");
        for (double v : r.numbers(n, "degrees")) {
            if (v < 1 || v > 5 || v != std::floor(v)) r.fail(n, "rank.degrees must be integers in 1..5");
            s.rank_degrees.push_back(static_cast<int>(v));
        }
        s.rank_threshold = r.positive("threshold", 1e-6);
        r.finish();
    }
    s.expect = parse_limits(t, {"normal_coordinates", "curvature", "rank_full_by", "rank_deficient"});
    return s;
}

CheckSpec parse_check(Table& t) {
    CheckSpec s;
    s.metric = parse_metric(t.table("metric"));
    const int d = make_builtin_metric(s.metric)->dim();
    Table target = t.table("target");
    if (target.has("metric")) {
        s.target_metric = parse_metric(target.table("metric"));
        if (make_builtin_metric(*s.target_metric)->dim() != d) target.fail(target.node(), "target metric has a different dimension");
    } else if (target.has("pushforward")) {
        s.target_map = parse_map(target.table("pushforward"), d);
    } else {
        target.fail(target.node(), "target needs 'metric' or 'pushforward'");
    }
    target.finish();
    s.points = t.points("points", d);
    s.seeds = parse_rotations(t, s.points.size(), d);
    s.degree = t.integer("degree", 3);
    if (s.degree < 0 || s.degree > 5) t.fail(t.raw("degree"), "degree must be between 0 and 5");
    s.delta = t.positive("delta", 0.3);
    s.tol = t.positive("tol", 1e-6);
    s.overlap_samples = t.integer("overlap_samples", 50);
    s.expect = parse_limits(t, {"verdict", "overlap"});
    return s;
}

PropagateSpec parse_propagate(Table& t) {
    PropagateSpec s;
    s.metric = parse_metric(t.table("metric"));
    const int d = make_builtin_metric(s.metric)->dim();
    Table target = t.table("target");
    s.target_map = parse_map(target.table("pushforward"), d);
    target.finish();
    s.base = t.vector("base", d);
    const YAML::Node paths = t.raw("paths");
    if (!paths.IsSequence() || paths.size() == 0) t.fail(paths, "paths must be a non-empty list of polylines");
    for (const auto& p : paths) {
        auto poly = t.points(p, "paths", d);
        if (poly.size() < 2) t.fail(p, "a path needs at least two points");
        if ((poly.front() - s.base).norm() > 0.0) t.fail(p, "every path must start at 'base'");
        s.paths.push_back(std::move(poly));
    }
    s.global_points = t.has("global_points") ? t.points("global_points", d) : std::vector<Vec>{};
    s.step = t.positive("step", 0.1);
    s.expect = parse_limits(t, {"oracle", "loop", "rigidity", "pullback"});
    return s;
}

TrackSpec parse_track(Table& t) {
    TrackSpec s;
    s.source = parse_family(t.table("source"));
    const int d = family_dim(s.source);
    Table target = t.table("target");
    s.transform = parse_map(target.table("transform"), d);
    target.finish();
    if (s.source.kind == "bergman") {
        if (d != 2 || s.transform.mobius || s.transform.offset.norm() != 0.0 ||
            (s.transform.linear.transpose() * s.transform.linear - Mat::Identity(2, 2)).norm() > 1e-12 ||
            s.transform.linear.determinant() < 0.0) {
            target.fail(target.node(), "bergman families take a rotation of C as target transform");
        }
    }
    s.points = t.points("points", d);
    s.grid = parse_grid(t);
    s.t0 = t.number("t0", s.grid.t.front());
    if (std::find(s.grid.t.begin(), s.grid.t.end(), s.t0) == s.grid.t.end()) t.fail(t.node(), "t0 must be a grid node");
    for (double x : s.grid.t) {
        if (x < s.source.t_min || x > s.source.t_max) t.fail(t.raw("grid"), "grid leaves the family's t_range");
    }
    if (t.has("tracker")) parse_tracker(t.table("tracker"), s.tracker);
    s.expect = parse_limits(t, {"linear", "image", "image_rate", "linear_rate", "residual"});
    return s;
}

BergmanSpec parse_bergman(Table& t) {
    BergmanSpec s;
    s.domain = parse_domain(t.table("domain"));
    s.t = t.number("t", 0.0);
    if (t.has("t_range")) {
        const YAML::Node n = t.raw("t_range");
        const auto r = t.numbers(n, "t_range");
        if (r.size() != 2 || !(r[1] > r[0])) t.fail(n, "t_range must be [t_min, t_max] with t_max > t_min");
        s.t_min = r[0];
        s.t_max = r[1];
    } else {
        s.t_min = std::min(-1.0, s.t);
        s.t_max = std::max(1.0, s.t);
    }
    check_domain(t, s.domain, s.t_min, s.t_max);
    const int d = 2 * make_domain(s.domain, s.t_min, s.t_max).dim();
    s.degree = t.integer("degree", 20);
    if (s.degree < 1) t.fail(t.raw("degree"), "degree must be positive");
    s.points = t.has("points") ? t.points("points", d) : std::vector<Vec>{};
    s.random_points = t.integer("random_points", 0);
    s.oracle = t.text("oracle", "none");
    if (s.oracle != "none" && s.oracle != "disc" && s.oracle != "ball") t.fail(t.raw("oracle"), "oracle must be none, disc or ball");
    if (t.has("mobius")) {
        if (d != 2) t.fail(t.raw("mobius"), "mobius invariance needs a domain in C");
        Table m = t.table("mobius");
        const double theta = m.number("theta", 0.0);
        const Vec w = m.has("w") ? m.vector("w", 2) : Vec::Zero(2);
        m.finish();
        s.mobius = MobiusCoefficients::disc_automorphism(theta, {w(0), w(1)});
    }
    if (t.has("pullback")) {
        Table p = t.table("pullback");
        s.pullback = true;
        s.pullback_t0 = p.number("t0", 0.0);
        s.pullback_degree = p.integer("degree", 12);
        s.pullback_point = p.vector("point", d);
        const YAML::Node n = p.raw("steps");
        s.steps = p.numbers(n, "steps");
        if (s.steps.size() != 3) p.fail(n, "pullback.steps needs three step sizes");
        for (double h : s.steps) {
            if (!(h > 0.0) || s.pullback_t0 - h < s.t_min || s.pullback_t0 + h > s.t_max) {
                p.fail(n, "pullback.steps must be positive and stay inside t_range");
            }
        }
        p.finish();
    }
    s.expect = parse_limits(t, {"oracle", "mobius", "richardson"});
    return s;
}

DemoSpec parse_demo(Table& t) {
    DemoSpec s;
    if (t.has("flip")) {
        Table f = t.table("flip");
        s.flip.amplitude = f.number("amplitude", s.flip.amplitude);
        s.flip.profile_scale = f.positive("profile_scale", s.flip.profile_scale);
        s.flip.half_width = f.positive("half_width", s.flip.half_width);
        f.finish();
        try {
            (void)build_flip_family(s.flip);
        } catch (const Error& e) {
            f.fail(f.node(), e.what());
        }
    }
    s.points = t.points("points", 2);
    s.count = t.integer("count", 40);
    if (s.count < 10 || s.count % 2 != 0) t.fail(t.raw("count"), "count must be even and at least 10");
    s.cross = t.flag("cross", true);
    if (t.has("tracker")) parse_tracker(t.table("tracker"), s.tracker);
    s.expect = parse_limits(t, {"flagged_adjacent", "residual"});
    return s;
}

const std::vector<std::string>& commands() {
    static const std::vector<std::string> c = {"invariants", "check", "propagate", "track", "bergman", "demo-discontinuity"};
    return c;
}

}  // namespace

std::vector<std::string> scenario_commands() { return commands(); }

std::vector<Scenario> parse_scenarios(const std::string& yaml_text, const std::string& file_name) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(file_name + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                         ": " + e.msg);
    }
    if (!root || root.IsNull()) throw ParseError(file_name + ": empty config");
    Table top(root, file_name, "config");
    const int schema = top.integer("schema", 1);
    if (schema != 1) top.fail(top.raw("schema"), "unsupported schema " + std::to_string(schema));
    const YAML::Node list = top.raw("scenarios");
    if (!list.IsSequence() || list.size() == 0) top.fail(list, "scenarios must be a non-empty list");
    top.finish();

    std::vector<Scenario> out;
    std::set<std::string> seen;
    for (const auto& node : list) {
        Table t(node, file_name, "scenario");
        Scenario s;
        s.id = t.text("id");
        s.origin = location(t);
        if (s.id.empty() || s.id.find_first_of("/\\ ") != std::string::npos) t.fail(t.raw("id"), "scenario id must be a non-empty word");
        if (!seen.insert(s.id).second) t.fail(t.raw("id"), "duplicate scenario id '" + s.id + "'");
        s.command = t.text("command");
        const double seed = t.number("seed", 0.0);
        if (seed < 0 || seed != std::floor(seed)) t.fail(t.raw("seed"), "seed must be a non-negative integer");
        s.seed = static_cast<std::uint64_t>(seed);
        (void)t.has("description");
        auto spec = std::make_shared<ScenarioSpec>();
        if (s.command == "invariants") {
            spec->body = parse_invariants(t);
        } else if (s.command == "check") {
            spec->body = parse_check(t);
        } else if (s.command == "propagate") {
            spec->body = parse_propagate(t);
        } else if (s.command == "track") {
            spec->body = parse_track(t);
        } else if (s.command == "bergman") {
            spec->body = parse_bergman(t);
        } else if (s.command == "demo-discontinuity") {
            spec->body = parse_demo(t);
        } else {
            t.fail(t.raw("command"), "unknown command '" + s.command + "'");
        }
        t.finish();
        s.spec = std::move(spec);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open config");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenarios(buf.str(), path.string());
}

// ------------------------------------------------------------------ execution

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Mat& m) {
    json out = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

// Uniform in [0, 1) from the top 53 bits; the standard distributions are not
// portable across library implementations.
double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Mat random_rotation(std::mt19937_64& rng, int d) {
    Mat a(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) a(i, j) = 2.0 * uniform(rng) - 1.0;
    }
    Eigen::HouseholderQR<Mat> qr(a);
    Mat q = qr.householderQ();
    if (q.determinant() < 0.0) q.col(0) *= -1.0;
    return q;
}

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
}

class Context {
public:
    Context(RunReport& r, double tol_scale) : r_(r), scale_(tol_scale) {}

    void at_most(const std::string& name, double value, double limit) {
        const double l = limit * scale_;
        r_.expectations.push_back({name, value, l, "<=", value <= l});
    }
    /// Counts and degrees are not tolerances and ignore the scale.
    void count_at_most(const std::string& name, double value, double limit) {
        r_.expectations.push_back({name, value, limit, "<=", value <= limit});
    }
    void equal(const std::string& name, double value, double expected) {
        r_.expectations.push_back({name, value, expected, "==", value == expected});
    }
    double scale() const { return scale_; }

private:
    RunReport& r_;
    double scale_;
};

std::vector<Frame> frames_at(const ChartMetric& g, const std::vector<Vec>& points, const std::vector<Mat>& seeds) {
    std::vector<Frame> out;
    for (std::size_t i = 0; i < points.size(); ++i) out.push_back(orthonormal_frame(g, points[i], seeds[i]));
    return out;
}

// -------------------------------------------------------------- invariants

json run_invariants(const InvariantsSpec& s, std::uint64_t seed, RunReport& r, Context& c) {
    const MetricPtr g = make_builtin_metric(s.metric);
    const int d = g->dim();
    std::vector<Vec> points = s.points;
    std::vector<Mat> seeds = s.seeds;
    std::mt19937_64 rng(seed);
    for (int k = 0; k < s.random_frames; ++k) {
        Vec p(d);
        for (int i = 0; i < d; ++i) p(i) = s.random_radius * (2.0 * uniform(rng) - 1.0);
        points.push_back(p);
        seeds.push_back(random_rotation(rng, d));
    }
    const std::vector<Frame> frames = frames_at(*g, points, seeds);
    const BallAtlas atlas = make_atlas(*g, frames, s.delta);
    const JetSignature sig = signature(*g, atlas, s.degree);

    // degree 0 is the identity and degree 1 vanishes in normal coordinates
    double normal = 0.0;
    double curvature = 0.0;
    std::vector<JetMatrix> mats;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const JetMatrix m = unpack_symmetric(sig.s_jets[i], d);
        const auto& layout = m(0, 0).layout();
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b) {
                normal = std::max(normal, std::abs(m(a, b).coeff(std::size_t{0}) - (a == b ? 1.0 : 0.0)));
                for (std::size_t k = layout.degree_begin(1); k < layout.degree_begin(std::min(2, s.degree + 1)); ++k) {
                    normal = std::max(normal, std::abs(m(a, b).coeff(k)));
                }
                if (s.curvature && s.degree >= 2) {
                    // -K/3 (delta_ab |x|^2 - x_a x_b)
                    for (std::size_t k = layout.degree_begin(2); k < layout.degree_begin(3); ++k) {
                        const MultiIndex& alpha = layout.index(k);
                        double pattern = 0.0;
                        if (a == b) {
                            for (int i = 0; i < d; ++i) pattern += alpha[i] == 2 ? 1.0 : 0.0;
                        }
                        if (a == b ? alpha[a] == 2 : (alpha[a] == 1 && alpha[b] == 1)) pattern -= 1.0;
                        curvature = std::max(curvature, std::abs(m(a, b).coeff(k) + *s.curvature / 3.0 * pattern));
                    }
                }
            }
        }
    }

    json out = {{"metric", g->name()}, {"degree", s.degree}, {"delta", s.delta}, {"signature", to_json(sig)}};
    json fj = json::array();
    for (const Frame& f : frames) fj.push_back({{"point", vec_json(f.point)}, {"basis", mat_json(f.basis)}});
    out["frames"] = fj;
    out["normal_coordinate_error"] = normal;
    if (s.expect.has("normal_coordinates")) c.at_most("normal_coordinates", normal, s.expect.at("normal_coordinates"));
    if (s.curvature) {
        out["curvature_pattern_error"] = curvature;
        if (s.expect.has("curvature")) c.at_most("curvature", curvature, s.expect.at("curvature"));
    }
    if (!s.rank_degrees.empty()) {
        const MetricFamily fam = MetricFamily::constant(g);
        FrameSection section{points, seeds};
        TrackerOptions topt;
        topt.rank_threshold = s.rank_threshold;
        json ranks = json::array();
        int full_at = -1;
        int max_rank = 0;
        int params = 0;
        for (int n : s.rank_degrees) {
            const RankReport rep = rank_probe(fam, 0.0, section, atlas.edges, n, topt);
            ranks.push_back({{"degree", n}, {"rank", rep.rank}, {"parameters", rep.parameter_count}, {"singular_values", rep.singular_values}});
            if (rep.rank == rep.parameter_count && full_at < 0) full_at = n;
            max_rank = std::max(max_rank, rep.rank);
            params = rep.parameter_count;
        }
        out["rank"] = ranks;
        out["rank_full_at"] = full_at;
        if (s.expect.has("rank_full_by")) {
            // never full counts as infinitely late
            c.count_at_most("rank_full_by", full_at < 0 ? std::numeric_limits<double>::infinity() : full_at, s.expect.at("rank_full_by"));
        }
        if (s.expect.rank_deficient && *s.expect.rank_deficient) c.count_at_most("rank_deficient", max_rank, params - 1);
    }

    std::ostringstream csv;
    csv << "kind,index,component,alpha,value\n";
    for (std::size_t i = 0; i < sig.s_jets.size(); ++i) {
        const Jet& j = sig.s_jets[i];
        for (std::size_t k = 0; k < j.num_monomials(); ++k) {
            for (int comp = 0; comp < j.value_dim(); ++comp) {
                csv << "s," << i << ',' << comp << ',' << j.layout().index(k).to_string() << ',' << fmt(j.coeff(k, comp)) << '\n';
            }
        }
    }
    for (std::size_t e = 0; e < sig.t_jets.size(); ++e) {
        for (int comp = 0; comp < static_cast<int>(sig.t_jets[e].size()); ++comp) {
            const Jet& j = sig.t_jets[e][comp];
            for (std::size_t k = 0; k < j.num_monomials(); ++k) {
                csv << "t," << e << ',' << comp << ',' << j.layout().index(k).to_string() << ',' << fmt(j.coeff(k)) << '\n';
            }
        }
    }
    r.csv = csv.str();
    return out;
}

// ------------------------------------------------------------------- check

json run_check(const CheckSpec& s, RunReport&, Context& c) {
    const MetricPtr g = make_builtin_metric(s.metric);
    const std::vector<Frame> frames = frames_at(*g, s.points, s.seeds);
    MetricPtr gh;
    std::vector<Frame> images;
    if (s.target_map) {
        gh = pushforward(g, *s.target_map);
        for (const Frame& f : frames) images.push_back({s.target_map->apply(f.point), s.target_map->jacobian(f.point) * f.basis});
    } else {
        gh = make_builtin_metric(*s.target_metric);
        images = frames_at(*gh, s.points, s.seeds);
    }
    const BallAtlas a = make_atlas(*g, frames, s.delta);
    const BallAtlas b = make_atlas(*gh, images, s.delta);
    const double tol = s.tol * c.scale();
    const AtlasVerdict v = check_atlas_isometry(*g, *gh, a, b, s.degree, tol);
    json out = {{"metric", g->name()}, {"target", gh->name()}, {"degree", s.degree}, {"tol", tol}, {"verdict", to_json(v)}};
    out["edges"] = a.edges;
    if (s.target_map) out["map"] = s.target_map->to_json();
    if (s.expect.verdict) c.equal("verdict_match", v.match ? 1.0 : 0.0, *s.expect.verdict == "match" ? 1.0 : 0.0);
    if (v.match && s.overlap_samples > 0 && !a.edges.empty()) {
        const LocalIsometry l = make_local_isometry(g, gh, a, b);
        const double disc = overlap_discrepancy(l, s.overlap_samples);
        out["overlap_discrepancy"] = disc;
        out["overlap_samples"] = s.overlap_samples;
        if (s.expect.has("overlap")) c.at_most("overlap", disc, s.expect.at("overlap"));
    } else if (s.expect.has("overlap")) {
        // nothing to glue: report the expectation as failed rather than skipping it
        c.at_most("overlap", std::numeric_limits<double>::infinity(), s.expect.at("overlap"));
    }
    return out;
}

// --------------------------------------------------------------- propagate

json run_propagate(const PropagateSpec& s, RunReport& r, Context& c) {
    const MetricPtr g = make_builtin_metric(s.metric);
    const MetricPtr gh = pushforward(g, s.target_map);
    const OneJet j0{s.base, s.target_map.apply(s.base), s.target_map.jacobian(s.base)};
    PropagationOptions popt;
    popt.step = s.step;
    json paths = json::array();
    double oracle = 0.0;
    double loop = 0.0;
    double rigidity = 0.0;
    bool any_loop = false;
    std::map<std::vector<double>, OneJet> ends;
    std::ostringstream csv;
    csv << "path,node,p1,p2,q1,q2,D11,D12,D21,D22,oracle_error\n";
    for (std::size_t pi = 0; pi < s.paths.size(); ++pi) {
        const auto chain = propagate_one_jet(*g, *gh, j0, s.paths[pi], popt);
        json nodes = json::array();
        for (std::size_t k = 0; k < chain.size(); ++k) {
            const OneJet& j = chain[k];
            const double e = std::max((j.image - s.target_map.apply(j.source)).norm(),
                                      (j.linear - s.target_map.jacobian(j.source)).cwiseAbs().maxCoeff());
            oracle = std::max(oracle, e);
            nodes.push_back(to_json(j));
            csv << pi << ',' << k << ',' << fmt(j.source(0)) << ',' << fmt(j.source(1)) << ',' << fmt(j.image(0)) << ','
                << fmt(j.image(1)) << ',' << fmt(j.linear(0, 0)) << ',' << fmt(j.linear(0, 1)) << ',' << fmt(j.linear(1, 0))
                << ',' << fmt(j.linear(1, 1)) << ',' << fmt(e) << '\n';
        }
        const OneJet& last = chain.back();
        if ((s.paths[pi].back() - s.base).norm() == 0.0) {
            any_loop = true;
            loop = std::max(loop, std::max((last.image - j0.image).norm(), (last.linear - j0.linear).cwiseAbs().maxCoeff()));
        }
        const Vec& end = s.paths[pi].back();
        const std::vector<double> key(end.data(), end.data() + end.size());
        if (auto it = ends.find(key); it != ends.end()) {
            rigidity = std::max(rigidity, std::max((it->second.image - last.image).norm(),
                                                   (it->second.linear - last.linear).cwiseAbs().maxCoeff()));
        } else {
            ends.emplace(key, last);
        }
        paths.push_back({{"polyline", s.paths[pi].size()}, {"nodes", nodes}});
    }
    json out = {{"metric", g->name()}, {"map", s.target_map.to_json()}, {"seed", to_json(j0)}, {"paths", paths}};
    out["oracle_error"] = oracle;
    if (s.expect.has("oracle")) c.at_most("oracle", oracle, s.expect.at("oracle"));
    if (any_loop) {
        out["loop_error"] = loop;
        if (s.expect.has("loop")) c.at_most("loop", loop, s.expect.at("loop"));
    }
    if (ends.size() < s.paths.size()) {
        out["rigidity_error"] = rigidity;
        if (s.expect.has("rigidity")) c.at_most("rigidity", rigidity, s.expect.at("rigidity"));
    }
    if (!s.global_points.empty()) {
        // pullback of g_hat through evaluate_global, Jacobian by central differences
        double worst = 0.0;
        const double h = 1e-4;
        const int d = g->dim();
        json pts = json::array();
        for (const Vec& x : s.global_points) {
            const Vec y = evaluate_global(*g, *gh, j0, x, popt);
            Mat jac(d, d);
            for (int k = 0; k < d; ++k) {
                Vec e = Vec::Zero(d);
                e(k) = h;
                jac.col(k) = (evaluate_global(*g, *gh, j0, x + e, popt) - evaluate_global(*g, *gh, j0, x - e, popt)) / (2 * h);
            }
            const double err = (jac.transpose() * gh->value(y) * jac - g->value(x)).cwiseAbs().maxCoeff();
            worst = std::max(worst, err);
            pts.push_back({{"x", vec_json(x)}, {"image", vec_json(y)}, {"pullback_error", err}});
        }
        out["global"] = pts;
        out["pullback_error"] = worst;
        if (s.expect.has("pullback")) c.at_most("pullback", worst, s.expect.at("pullback"));
    }
    r.csv = csv.str();
    return out;
}

// ------------------------------------------------------------------- track

MetricPtr moving_bumps_at(const FamilySpec& f, double t) {
    std::vector<GaussianBump> bumps;
    for (const MovingBump& b : f.bumps) bumps.push_back({b.center + t * b.velocity, b.amplitude, b.width});
    return make_conformal_scalar(2, std::move(bumps), f.half_width);
}

struct FamilyPair {
    MetricFamily g;
    MetricFamily gh;
};

FamilyPair build_families(const TrackSpec& s) {
    const FamilySpec& f = s.source;
    if (f.kind == "bergman") {
        const DomainFamily dom = make_domain(f.domain, f.t_min, f.t_max);
        CMat u(1, 1);
        u(0, 0) = {s.transform.linear(0, 0), s.transform.linear(1, 0)};
        PullbackOptions po;
        po.degree = f.kernel_degree;
        return {pullback_family(dom, s.t0, po, s.grid.t), pullback_family(rotate_family(dom, u), s.t0, po, s.grid.t)};
    }
    MetricFamily::Generator gen;
    if (f.kind == "constant") {
        const MetricPtr g = make_builtin_metric(f.metric);
        gen = [g](double) { return g; };
    } else {
        gen = [f](double t) { return moving_bumps_at(f, t); };
    }
    const MapSpec map = s.transform;
    return {MetricFamily(f.t_min, f.t_max, gen, "source", true),
            MetricFamily(f.t_min, f.t_max, [gen, map](double t) { return pushforward(gen(t), map); }, "target", true)};
}

json run_track(const TrackSpec& s, RunReport& r, Context& c) {
    const FamilyPair fam = build_families(s);
    const FrameSection section = FrameSection::standard(s.points);
    const Vec& p = s.points.front();
    const OneJet seed{p, s.transform.apply(p), s.transform.jacobian(p)};
    const TrackRecord rec = track(fam.g, fam.gh, section, seed, s.t0, s.grid.t, s.tracker);

    json out = {{"source", s.source.kind}, {"map", s.transform.to_json()}, {"t0", s.t0}, {"record", to_json(rec)}};
    double linear = 0.0;
    double image = 0.0;
    double residual = 0.0;
    int rejected = 0;
    bool flagged = false;
    for (const TrackNode& n : rec.nodes) {
        flagged = flagged || !n.flags.empty();
        if (!n.accepted) {
            ++rejected;
            continue;
        }
        linear = std::max(linear, (n.jet.linear - s.transform.jacobian(n.jet.source)).cwiseAbs().maxCoeff());
        image = std::max(image, (n.jet.image - s.transform.apply(n.jet.source)).norm());
        residual = std::max(residual, n.residual);
    }
    out["rejected_nodes"] = rejected;
    out["linear_error"] = linear;
    out["image_error"] = image;
    out["max_residual"] = residual;
    if (rec.accepted().size() >= 5) {
        const SmoothnessReport sm = smoothness_diagnostic(rec, s.tracker);
        out["smoothness"] = to_json(sm);
        flagged = flagged || !sm.flagged.empty();
        if (s.expect.has("image_rate")) c.at_most("image_rate", sm.max_image_rate, s.expect.at("image_rate"));
        if (s.expect.has("linear_rate")) c.at_most("linear_rate", sm.max_linear_rate, s.expect.at("linear_rate"));
    }
    c.equal("rejected_nodes", rejected, 0);
    if (s.expect.has("linear")) c.at_most("linear", linear, s.expect.at("linear"));
    if (s.expect.has("image")) c.at_most("image", image, s.expect.at("image"));
    if (s.expect.has("residual")) c.at_most("residual", residual, s.expect.at("residual"));
    r.csv = to_csv(rec);
    if (flagged) r.status = RunStatus::flagged;
    return out;
}

// ----------------------------------------------------------------- bergman

json run_bergman(const BergmanSpec& s, std::uint64_t seed, RunReport& r, Context& c) {
    const DomainFamily fam = make_domain(s.domain, s.t_min, s.t_max);
    const DomainSpec dom = fam.at(s.t);
    const DomainCheck check = validate_domain(dom);
    const auto ka = std::make_shared<const KernelApprox>(kernel_build(dom, s.degree, dom.quad));
    const MetricPtr g = bergman_metric(ka);
    const int n = 2 * dom.dim();

    std::vector<Vec> points = s.points;
    std::mt19937_64 rng(seed);
    for (int k = 0; k < s.random_points;) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x(i) = dom.center(i) + check.inradius * (2.0 * uniform(rng) - 1.0);
        if (g->contains(x)) {
            points.push_back(x);
            ++k;
        }
    }

    json out = {{"domain", dom.name},
                {"t", s.t},
                {"degree", s.degree},
                {"basis_size", ka->basis_size()},
                {"quadrature_nodes", ka->nodes},
                {"volume", ka->volume},
                {"gram_residual", ka->gram_residual},
                {"inradius", check.inradius},
                {"min_levi", std::isfinite(check.min_levi) ? json(check.min_levi) : json("inf")}};
    std::ostringstream csv;
    csv << "point";
    for (int i = 0; i < n; ++i) csv << ",x" << i + 1;
    csv << ",K";
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) csv << ",g" << i + 1 << j + 1;
    }
    csv << '\n';
    json pts = json::array();
    for (std::size_t k = 0; k < points.size(); ++k) {
        const Vec& x = points[k];
        const Mat gx = g->value(x);
        const double kd = ka->diagonal(x);
        pts.push_back({{"x", vec_json(x)}, {"K", kd}, {"metric", mat_json(gx)}});
        csv << k;
        for (int i = 0; i < n; ++i) csv << ',' << fmt(x(i));
        csv << ',' << fmt(kd);
        for (int i = 0; i < n; ++i) {
            for (int j = i; j < n; ++j) csv << ',' << fmt(gx(i, j));
        }
        csv << '\n';
    }
    out["points"] = pts;

    if (s.oracle == "disc") {
        // K_D(z, w) = sum_{k <= D} (k + 1) / pi (z conj(w))^k on the unit disc
        double worst = 0.0;
        for (const Vec& x : points) {
            for (const Vec& y : points) {
                const std::complex<double> z(x(0), x(1));
                const std::complex<double> w(y(0), y(1));
                std::complex<double> exact = 0.0;
                std::complex<double> pw = 1.0;
                for (int k = 0; k <= s.degree; ++k) {
                    exact += (k + 1.0) / std::numbers::pi * pw;
                    pw *= z * std::conj(w);
                }
                worst = std::max(worst, std::abs(ka->kernel(to_complex(x), to_complex(y)) - exact) / std::abs(exact));
            }
        }
        out["oracle"] = {{"kind", "disc_partial_sum"}, {"max_relative_error", worst}};
        if (s.expect.has("oracle")) c.at_most("oracle", worst, s.expect.at("oracle"));
    } else if (s.oracle == "ball") {
        // unit ball in C^d: K(0, 0) = d! / pi^d
        const int d = dom.dim();
        double exact = 1.0;
        for (int k = 2; k <= d; ++k) exact *= k;
        exact /= std::pow(std::numbers::pi, d);
        const double err = std::abs(ka->diagonal(Vec::Zero(n)) - exact) / exact;
        out["oracle"] = {{"kind", "ball_origin"}, {"exact", exact}, {"relative_error", err}};
        if (s.expect.has("oracle")) c.at_most("oracle", err, s.expect.at("oracle"));
    }

    if (s.mobius) {
        const MapPtr m = make_mobius_map(*s.mobius);
        const auto pulled = std::make_shared<PullbackMetric>(g, m, dom.box, "mobius_pullback");
        double worst = 0.0;
        for (const Vec& x : points) {
            if (!g->contains(m->apply(x))) continue;
            const Mat b = g->value(x);
            worst = std::max(worst, (pulled->value(x) - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff());
        }
        out["mobius_invariance_error"] = worst;
        if (s.expect.has("mobius")) c.at_most("mobius", worst, s.expect.at("mobius"));
    }

    if (s.pullback) {
        PullbackOptions po;
        po.degree = s.pullback_degree;
        const double t0 = s.pullback_t0;
        std::vector<double> grid = {t0};
        for (double h : s.steps) {
            grid.push_back(t0 - h);
            grid.push_back(t0 + h);
        }
        std::sort(grid.begin(), grid.end());
        const MetricFamily h = pullback_family(fam, t0, po, grid);
        std::vector<Mat> d;
        for (double step : s.steps) d.push_back((h.at(t0 + step)->value(s.pullback_point) - h.at(t0 - step)->value(s.pullback_point)) / (2 * step));
        const double e12 = (d[0] - d[1]).cwiseAbs().maxCoeff();
        const double e23 = (d[1] - d[2]).cwiseAbs().maxCoeff();
        const double ratio = e12 / e23;
        const double expected = std::pow(s.steps[0] / s.steps[1], 2);
        out["pullback"] = {{"point", vec_json(s.pullback_point)},
                           {"steps", s.steps},
                           {"derivative", mat_json(d[2])},
                           {"differences", {e12, e23}},
                           {"richardson_ratio", ratio},
                           {"expected_ratio", expected}};
        if (s.expect.has("richardson")) c.at_most("richardson", std::abs(ratio / expected - 1.0), s.expect.at("richardson"));
    }
    r.csv = csv.str();
    return out;
}

// ------------------------------------------------------ demo-discontinuity

json run_demo(const DemoSpec& s, RunReport& r, Context& c) {
    const FlipFamily fam = build_flip_family(s.flip);
    const FrameSection section = FrameSection::standard(s.points);
    const Vec& p = s.points.front();
    // half-grids symmetric about 0, which is not a node
    const int half = s.count / 2;
    std::vector<double> left;
    std::vector<double> right;
    for (int k = 0; k < half; ++k) {
        const double t = s.flip.t_max * (k + 0.5) / half;
        right.push_back(t);
        left.push_back(-t);
    }
    const TrackRecord rr = track(fam.source, fam.target, section, OneJet{p, p, Mat::Identity(2, 2)}, right.back(), right, s.tracker);
    const TrackRecord rl = track(fam.source, fam.target, section, OneJet{p, fam.reflection * p, fam.reflection}, left.back(),
                                 left, s.tracker);
    const TrackRecord merged = merge_records(rl, rr);
    const SmoothnessReport sm = smoothness_diagnostic(merged, s.tracker);

    int rejected = 0;
    double residual = 0.0;
    for (const TrackNode& n : merged.nodes) {
        if (!n.accepted) ++rejected;
        else residual = std::max(residual, n.residual);
    }
    const double nearest = right.front();
    bool adjacent = !sm.flagged.empty();
    for (double t : sm.flagged) adjacent = adjacent && std::abs(std::abs(t) - nearest) < 1e-12;

    json out = {{"amplitude", s.flip.amplitude},
                {"profile_scale", s.flip.profile_scale},
                {"record", to_json(merged)},
                {"smoothness", to_json(sm)},
                {"flagged", sm.flagged},
                {"flagged_adjacent_to_zero", adjacent},
                {"rejected_nodes", rejected},
                {"max_residual", residual}};

    // p vanishes to all orders at 0 iff p(h) / h^k -> 0 for every k; report k <= 3
    json profile = json::array();
    for (double f : {0.1, 0.05, 0.025}) {
        const double h = f * s.flip.profile_scale;
        const double v = flip_profile(h, s.flip.profile_scale);
        profile.push_back({{"h", h}, {"p", v}, {"p_over_h", v / h}, {"p_over_h2", v / (h * h)}, {"p_over_h3", v / (h * h * h)}});
    }
    out["profile_derivatives_at_zero"] = profile;

    if (s.cross) {
        // one branch from the right end across t = 0 with the identity seed
        std::vector<double> all = left;
        all.insert(all.end(), right.begin(), right.end());
        const TrackRecord cr = track(fam.source, fam.target, section, OneJet{p, p, Mat::Identity(2, 2)}, right.back(), all, s.tracker);
        double stopped = std::numeric_limits<double>::quiet_NaN();
        for (const TrackNode& n : cr.nodes) {
            if (!n.accepted && (std::isnan(stopped) || n.t > stopped)) stopped = n.t;
        }
        out["crossing"] = {{"accepted", cr.accepted().size()},
                           {"nodes", cr.nodes.size()},
                           {"stopped_at", std::isnan(stopped) ? json(nullptr) : json(stopped)},
                           {"notes", cr.notes}};
    }
    c.equal("rejected_nodes", rejected, 0);
    if (s.expect.flagged_adjacent) c.equal("flagged_adjacent", adjacent ? 1.0 : 0.0, *s.expect.flagged_adjacent ? 1.0 : 0.0);
    if (s.expect.has("residual")) c.at_most("residual", residual, s.expect.at("residual"));
    r.csv = to_csv(merged);
    if (!sm.flagged.empty()) r.status = RunStatus::flagged;
    return out;
}

}  // namespace

std::string to_string(RunStatus s) {
    switch (s) {
        case RunStatus::pass: return "pass";
        case RunStatus::flagged: return "flagged";
        case RunStatus::fail: return "fail";
        case RunStatus::error: return "error";
    }
    return "error";
}

RunReport run_scenario(const Scenario& s, const RunOptions& opt) {
    RunReport r;
    r.scenario = s.id;
    r.command = s.command;
    r.seed = opt.seed.value_or(s.seed);
    r.status = RunStatus::pass;
    const auto start = std::chrono::steady_clock::now();
    Context c(r, opt.tol_scale);
    try {
        if (!s.spec) throw PreconditionError("scenario has no specification");
        r.result = std::visit(
            [&](const auto& spec) -> json {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, InvariantsSpec>) return run_invariants(spec, r.seed, r, c);
                else if constexpr (std::is_same_v<T, CheckSpec>) return run_check(spec, r, c);
                else if constexpr (std::is_same_v<T, PropagateSpec>) return run_propagate(spec, r, c);
                else if constexpr (std::is_same_v<T, TrackSpec>) return run_track(spec, r, c);
                else if constexpr (std::is_same_v<T, BergmanSpec>) return run_bergman(spec, r.seed, r, c);
                else return run_demo(spec, r, c);
            },
            s.spec->body);
        for (const Expectation& e : r.expectations) {
            if (!e.pass) r.status = RunStatus::fail;
        }
    } catch (const std::exception& e) {
        r.status = RunStatus::error;
        r.error = e.what();
        r.csv.clear();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::vector<RunReport> run_batch(const std::vector<Scenario>& scenarios, const RunOptions& opt) {
    std::vector<RunReport> out(scenarios.size());
    if (scenarios.size() == 1) {
        out[0] = run_scenario(scenarios[0], opt);
        return out;
    }
    parallel_for(scenarios.size(), [&](std::size_t i) { out[i] = run_scenario(scenarios[i], opt); });
    return out;
}

json to_json(const RunReport& r, bool include_timing) {
    json e = json::array();
    for (const Expectation& x : r.expectations) {
        e.push_back({{"name", x.name},
                     {"value", std::isfinite(x.value) ? json(x.value) : json("inf")},
                     {"limit", x.limit},
                     {"relation", x.relation},
                     {"pass", x.pass}});
    }
    json out = {{"schema", report_schema},
                {"scenario", r.scenario},
                {"command", r.command},
                {"seed", r.seed},
                {"status", to_string(r.status)},
                {"expectations", e},
                {"result", r.result}};
    if (!r.error.empty()) out["error"] = r.error;
    if (include_timing) out["seconds"] = r.seconds;
    return out;
}

void write_report(const RunReport& r, const std::filesystem::path& dir, bool include_timing) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / (r.scenario + ".json"));
        f << to_json(r, include_timing).dump(2) << '\n';
        if (!f) throw Error("cannot write report for '" + r.scenario + "'");
    }
    if (!r.csv.empty()) {
        std::ofstream f(dir / (r.scenario + ".csv"));
        f << r.csv;
        if (!f) throw Error("cannot write plot data for '" + r.scenario + "'");
    }
}

int exit_code(const std::vector<RunReport>& reports) {
    int code = 0;
    for (const RunReport& r : reports) {
        if (r.status == RunStatus::error || r.status == RunStatus::fail) return 1;
        if (r.status == RunStatus::flagged) code = 2;
    }
    return code;
}

}  // namespace isojet
