#include "isojet/family_tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "isojet/finite_difference.hpp"
#include "isojet/parallel.hpp"

namespace isojet {

std::vector<Frame> FrameSection::at(const ChartMetric& g) const {
    if (points.size() != seeds.size()) throw DimensionError("frame section: points and seeds differ in count");
    std::vector<Frame> out;
    for (std::size_t i = 0; i < points.size(); ++i) out.push_back(orthonormal_frame(g, points[i], seeds[i]));
    return out;
}

FrameSection FrameSection::standard(std::vector<Vec> points) {
    FrameSection s;
    for (const auto& p : points) s.seeds.push_back(Mat::Identity(p.size(), p.size()));
    s.points = std::move(points);
    return s;
}

JetSignature target_signature_H(const MetricFamily& g, const FrameSection& gamma, const std::vector<Edge>& edges,
                                double t, int n, const InvariantOptions& opt) {
    const MetricPtr gt = g.at(t);
    const BallAtlas atlas{gamma.at(*gt), 0.0, edges};
    return signature(*gt, atlas, n, opt);
}

namespace {

// Frames as (base point, Cayley coordinates) relative to reference frames:
// basis = GS_g(q) * Q0 * cayley(K), parameters zero at the reference.
class FrameParams {
public:
    FrameParams(const ChartMetric& g, const std::vector<Frame>& reference) : g_(g), d_(g.dim()) {
        for (const auto& f : reference) {
            q0_.push_back(f.point);
            const Mat ref = standard_frame(g, f.point).basis;
            orth_.push_back(polar_orthogonal(ref.inverse() * f.basis));
        }
    }

    int per_frame() const { return d_ + d_ * (d_ - 1) / 2; }
    int count() const { return per_frame() * static_cast<int>(q0_.size()); }

    std::vector<Frame> frames(const Vec& x) const {
        std::vector<Frame> out;
        for (std::size_t i = 0; i < q0_.size(); ++i) {
            const int off = static_cast<int>(i) * per_frame();
            const Vec q = q0_[i] + x.segment(off, d_);
            const Mat ref = standard_frame(g_, q).basis;
            const Mat rot = cayley(skew_from_params(x.data() + off + d_, d_));
            out.push_back({q, ref * orth_[i] * rot});
        }
        return out;
    }

private:
    const ChartMetric& g_;
    int d_;
    std::vector<Vec> q0_;
    std::vector<Mat> orth_;
};

// Signature residual of frames(x) against a target; false when the frames
// leave the chart or shooting fails.
struct SignatureResidual {
    const ChartMetric& g;
    const FrameParams& params;
    const std::vector<Edge>& edges;
    int degree;
    const Vec& target;
    const InvariantOptions& inv;

    bool operator()(const Vec& x, Vec& out) const {
        try {
            const BallAtlas atlas{params.frames(x), 0.0, edges};
            out = flatten(signature(g, atlas, degree, inv)) - target;
            return out.allFinite();
        } catch (const Error&) {
            return false;
        }
    }
};

Mat central_jacobian(const SignatureResidual& r, const Vec& x, double h, std::size_t rows) {
    const Eigen::Index p = x.size();
    Mat jac(static_cast<Eigen::Index>(rows), p);
    std::vector<char> ok(static_cast<std::size_t>(p), 0);
    parallel_for(static_cast<std::size_t>(p), [&](std::size_t k) {
        Vec xp = x;
        Vec xm = x;
        xp(static_cast<Eigen::Index>(k)) += h;
        xm(static_cast<Eigen::Index>(k)) -= h;
        Vec rp;
        Vec rm;
        if (r(xp, rp) && r(xm, rm)) {
            jac.col(static_cast<Eigen::Index>(k)) = (rp - rm) / (2 * h);
            ok[k] = 1;
        }
    });
    for (char c : ok) {
        if (!c) throw ConvergenceError("signature Jacobian: a perturbed frame left the chart");
    }
    return jac;
}

}  // namespace

FrameFit solve_frames(const MetricFamily& g_hat, double t, const JetSignature& target, const std::vector<Frame>& guess,
                      const TrackerOptions& opt) {
    if (static_cast<int>(guess.size()) != static_cast<int>(target.s_jets.size())) {
        throw PreconditionError("solve_frames: guess and target differ in frame count");
    }
    const MetricPtr gt = g_hat.at(t);
    const FrameParams params(*gt, guess);
    const Vec tvec = flatten(target);
    const SignatureResidual res{*gt, params, target.edges, target.degree, tvec, opt.invariants};

    Vec x = Vec::Zero(params.count());
    Vec r;
    if (!res(x, r)) throw PreconditionError("solve_frames: initial guess is not admissible");
    FrameFit fit;
    double cost = r.squaredNorm();
    double lambda = 1e-4;
    for (int it = 0; it < opt.max_iterations && std::sqrt(cost) > opt.residual_tolerance; ++it) {
        Mat jac;
        try {
            jac = central_jacobian(res, x, opt.jacobian_step, static_cast<std::size_t>(r.size()));
        } catch (const ConvergenceError&) {
            break;
        }
        const Vec grad = jac.transpose() * r;
        fit.gradient_norm = grad.norm();
        if (fit.gradient_norm < opt.gradient_tolerance) break;
        const Mat jtj = jac.transpose() * jac;
        const double scale = std::max(jtj.diagonal().maxCoeff(), 1e-300);
        bool improved = false;
        Vec step;
        for (int tries = 0; tries < 30; ++tries) {
            const Mat a = jtj + lambda * scale * Mat::Identity(jtj.rows(), jtj.cols());
            step = a.ldlt().solve(-grad);
            Vec rn;
            if (step.allFinite() && res(x + step, rn) && rn.squaredNorm() < cost) {
                x += step;
                r = std::move(rn);
                cost = r.squaredNorm();
                lambda = std::max(lambda / 5.0, 1e-12);
                improved = true;
                break;
            }
            lambda *= 8.0;
        }
        ++fit.iterations;
        if (!improved || step.norm() < opt.step_tolerance) break;
    }
    fit.frames = params.frames(x);
    fit.residual = std::sqrt(cost);
    fit.converged = fit.residual <= opt.accept_residual;
    return fit;
}

RankReport rank_probe(const MetricFamily& g, double t, const FrameSection& gamma, const std::vector<Edge>& edges, int n,
                      const TrackerOptions& opt) {
    const MetricPtr gt = g.at(t);
    const std::vector<Frame> frames = gamma.at(*gt);
    const FrameParams params(*gt, frames);
    const BallAtlas atlas{frames, 0.0, edges};
    const Vec base = flatten(signature(*gt, atlas, n, opt.invariants));
    const Vec zero = Vec::Zero(base.size());
    // residual against zero so the Jacobian is that of the signature itself
    const SignatureResidual res{*gt, params, edges, n, zero, opt.invariants};
    const Mat jac = central_jacobian(res, Vec::Zero(params.count()), opt.jacobian_step, static_cast<std::size_t>(base.size()));
    Eigen::JacobiSVD<Mat> svd(jac);
    RankReport rep;
    rep.parameter_count = params.count();
    const auto& s = svd.singularValues();
    rep.singular_values.assign(s.data(), s.data() + s.size());
    const double smax = s.size() > 0 ? s(0) : 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (smax > 0.0 && s(i) > opt.rank_threshold * smax) ++rep.rank;
    }
    return rep;
}

// ------------------------------------------------------------------ marching

std::vector<const TrackNode*> TrackRecord::accepted() const {
    std::vector<const TrackNode*> out;
    for (const auto& n : nodes) {
        if (n.accepted) out.push_back(&n);
    }
    return out;
}

namespace {

struct MarchState {
    double t;
    std::vector<Frame> source;  // gamma(t)
    std::vector<Frame> target;  // solved frames
};

OneJet jet_at_first(const MarchState& s) {
    const Frame& b = s.source.front();
    const Frame& bh = s.target.front();
    return {b.point, bh.point, bh.basis * b.basis.inverse()};
}

// Frames at t predicted by keeping each frame-change map D_i = B_hat_i B_i^{-1} fixed.
std::vector<Frame> predict(const MarchState& prev, const std::vector<Frame>& source_now) {
    std::vector<Frame> out;
    for (std::size_t i = 0; i < source_now.size(); ++i) {
        const Mat d = prev.target[i].basis * prev.source[i].basis.inverse();
        out.push_back({prev.target[i].point, d * source_now[i].basis});
    }
    return out;
}

struct StepResult {
    bool ok = false;
    FrameFit fit;
    MarchState state;
};

StepResult solve_at(const MetricFamily& g, const MetricFamily& g_hat, const FrameSection& gamma,
                    const std::vector<Edge>& edges, const MarchState& prev, double t, const TrackerOptions& opt) {
    StepResult r;
    try {
        const JetSignature h = target_signature_H(g, gamma, edges, t, opt.degree, opt.invariants);
        const std::vector<Frame> source = gamma.at(*g.at(t));
        r.fit = solve_frames(g_hat, t, h, predict(prev, source), opt);
        r.ok = r.fit.converged;
        r.state = {t, source, r.fit.frames};
    } catch (const Error&) {
        r.ok = false;
    }
    return r;
}

TrackNode make_node(const StepResult& r) {
    TrackNode n;
    n.t = r.state.t;
    n.accepted = true;
    n.frames = r.state.target;
    n.jet = jet_at_first(r.state);
    n.residual = r.fit.residual;
    n.iterations = r.fit.iterations;
    return n;
}

void march(const MetricFamily& g, const MetricFamily& g_hat, const FrameSection& gamma, const std::vector<Edge>& edges,
           MarchState state, const std::vector<double>& targets, const TrackerOptions& opt, TrackRecord& rec) {
    for (double t : targets) {
        StepResult r = solve_at(g, g_hat, gamma, edges, state, t, opt);
        int halvings = 0;
        while (!r.ok && halvings < opt.max_halvings) {
            ++halvings;
            const int pieces = 1 << halvings;
            MarchState sub = state;
            bool ok = true;
            for (int k = 1; k <= pieces && ok; ++k) {
                const double tk = state.t + (t - state.t) * static_cast<double>(k) / pieces;
                r = solve_at(g, g_hat, gamma, edges, sub, tk, opt);
                ok = r.ok;
                if (ok) sub = r.state;
            }
        }
        if (!r.ok) {
            TrackNode n;
            n.t = t;
            n.accepted = false;
            n.residual = r.fit.residual;
            n.iterations = r.fit.iterations;
            n.flags.push_back("solve_failed");
            rec.nodes.push_back(std::move(n));
            std::ostringstream note;
            note << "branch stopped at t=" << t << " after " << opt.max_halvings << " step halvings";
            rec.notes.push_back(note.str());
            return;
        }
        if (halvings > 0) {
            std::ostringstream note;
            note << "t=" << t << " reached with " << halvings << " step halving(s)";
            rec.notes.push_back(note.str());
        }
        rec.nodes.push_back(make_node(r));
        state = r.state;
    }
}

}  // namespace

TrackRecord track(const MetricFamily& g, const MetricFamily& g_hat, const FrameSection& gamma, const OneJet& seed,
                  double t0, std::vector<double> grid, const TrackerOptions& opt) {
    if (gamma.size() < 1) throw PreconditionError("track: frame section is empty");
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const auto it0 = std::find_if(grid.begin(), grid.end(), [&](double t) { return std::abs(t - t0) <= 1e-12; });
    if (it0 == grid.end()) throw PreconditionError("track: grid must contain the seed parameter");
    if ((seed.source - gamma.points.front()).norm() > 1e-12) {
        throw PreconditionError("track: seed must be a 1-jet at the first base point");
    }

    const MetricPtr g0 = g.at(t0);
    const MetricPtr gh0 = g_hat.at(t0);
    const std::vector<Frame> source = gamma.at(*g0);
    TrackRecord rec;
    rec.degree = opt.degree;
    rec.edges = make_atlas(*g0, source, opt.delta, opt.propagation.log).edges;

    // initial target frames from the seed: propagate it to every base point
    FrameFit fit0;
    std::string why = "seed does not reproduce the target signature";
    try {
        std::vector<Frame> guess;
        for (std::size_t i = 0; i < source.size(); ++i) {
            OneJet j = seed;
            if (i > 0) j = propagate_one_jet(*g0, *gh0, seed, {seed.source, source[i].point}, opt.propagation).back();
            guess.push_back({j.image, j.linear * source[i].basis});
        }
        const JetSignature h0 = target_signature_H(g, gamma, rec.edges, t0, opt.degree, opt.invariants);
        fit0 = solve_frames(g_hat, t0, h0, guess, opt);
    } catch (const Error& e) {
        why = std::string("seed rejected: ") + e.what();
        fit0.converged = false;
        fit0.residual = std::numeric_limits<double>::infinity();
    }
    StepResult first{fit0.converged, fit0, {t0, source, fit0.frames}};
    if (!first.ok) {
        TrackNode n;
        n.t = t0;
        n.residual = fit0.residual;
        n.iterations = fit0.iterations;
        n.flags.push_back("seed_inconsistent");
        rec.nodes.push_back(std::move(n));
        rec.notes.push_back(why);
        return rec;
    }
    rec.nodes.push_back(make_node(first));

    const std::vector<double> right(std::next(it0), grid.end());
    std::vector<double> left(grid.begin(), it0);
    std::reverse(left.begin(), left.end());
    march(g, g_hat, gamma, rec.edges, first.state, right, opt, rec);
    march(g, g_hat, gamma, rec.edges, first.state, left, opt, rec);
    std::sort(rec.nodes.begin(), rec.nodes.end(), [](const TrackNode& a, const TrackNode& b) { return a.t < b.t; });
    return rec;
}

TrackRecord merge_records(const TrackRecord& a, const TrackRecord& b) {
    TrackRecord out = a;
    for (const auto& n : b.nodes) {
        for (const auto& m : out.nodes) {
            if (m.t == n.t) throw PreconditionError("merge_records: records share a parameter value");
        }
        out.nodes.push_back(n);
    }
    out.notes.insert(out.notes.end(), b.notes.begin(), b.notes.end());
    std::sort(out.nodes.begin(), out.nodes.end(), [](const TrackNode& x, const TrackNode& y) { return x.t < y.t; });
    return out;
}

// --------------------------------------------------------------- smoothness

namespace {

Vec node_state(const TrackNode& n) {
    const int d = static_cast<int>(n.jet.image.size());
    Vec z(d + d * d);
    z.head(d) = n.jet.image;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) z(d + i * d + j) = n.jet.linear(i, j);
    }
    return z;
}

}  // namespace

SmoothnessReport smoothness_diagnostic(const TrackRecord& rec, const TrackerOptions& opt) {
    const auto acc = rec.accepted();
    if (acc.size() < 5) throw PreconditionError("smoothness_diagnostic: need at least 5 accepted nodes");
    const std::size_t n = acc.size();
    const int d = static_cast<int>(acc.front()->jet.image.size());
    std::vector<Vec> z;
    SmoothnessReport rep;
    for (const auto* node : acc) {
        rep.t.push_back(node->t);
        z.push_back(node_state(*node));
    }
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t lo = std::min(k >= 2 ? k - 2 : 0, n - 5);
        const std::vector<double> nodes(rep.t.begin() + static_cast<std::ptrdiff_t>(lo), rep.t.begin() + static_cast<std::ptrdiff_t>(lo + 5));
        const auto w = fornberg_weights(rep.t[k], nodes, 2);
        Vec d1 = Vec::Zero(z[0].size());
        Vec d2 = Vec::Zero(z[0].size());
        for (std::size_t j = 0; j < 5; ++j) {
            d1 += w[1][j] * z[lo + j];
            d2 += w[2][j] * z[lo + j];
        }
        rep.max_image_rate = std::max(rep.max_image_rate, d1.head(d).cwiseAbs().maxCoeff());
        rep.max_linear_rate = std::max(rep.max_linear_rate, d1.tail(d * d).cwiseAbs().maxCoeff());
        rep.first.push_back(std::move(d1));
        rep.second.push_back(std::move(d2));
    }
    std::vector<double> rates;
    for (std::size_t k = 1; k < n; ++k) rates.push_back((z[k] - z[k - 1]).norm() / (rep.t[k] - rep.t[k - 1]));
    std::vector<double> sorted = rates;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double scale = std::max(sorted[sorted.size() / 2], opt.rate_floor);
    rep.jump_score.push_back(0.0);
    for (std::size_t k = 1; k < n; ++k) {
        const double score = rates[k - 1] / scale;
        rep.jump_score.push_back(score);
        if (score > opt.jump_threshold) rep.flagged.push_back(rep.t[k]);
    }
    return rep;
}

// ------------------------------------------------------------------ output

namespace {

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

nlohmann::json to_json(const TrackRecord& rec) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : rec.nodes) {
        nlohmann::json j = {{"t", n.t}, {"accepted", n.accepted}, {"residual", n.residual},
                            {"iterations", n.iterations}, {"flags", n.flags}};
        if (n.accepted) j["one_jet"] = to_json(n.jet);
        nodes.push_back(std::move(j));
    }
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [i, j] : rec.edges) edges.push_back({i, j});
    return {{"degree", rec.degree}, {"edges", edges}, {"nodes", nodes}, {"notes", rec.notes}};
}

nlohmann::json to_json(const SmoothnessReport& rep) {
    nlohmann::json first = nlohmann::json::array();
    nlohmann::json second = nlohmann::json::array();
    for (const auto& v : rep.first) first.push_back(vec_json(v));
    for (const auto& v : rep.second) second.push_back(vec_json(v));
    return {{"t", rep.t},
            {"first_derivative", first},
            {"second_derivative", second},
            {"jump_score", rep.jump_score},
            {"flagged", rep.flagged},
            {"max_image_rate", rep.max_image_rate},
            {"max_linear_rate", rep.max_linear_rate}};
}

std::string to_csv(const TrackRecord& rec) {
    std::ostringstream out;
    out.precision(17);
    int d = 0;
    for (const auto& n : rec.nodes) {
        if (n.accepted) {
            d = static_cast<int>(n.jet.image.size());
            break;
        }
    }
    out << "t";
    for (int i = 0; i < d; ++i) out << ",q" << i + 1;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) out << ",D" << i + 1 << j + 1;
    }
    out << ",residual,flags\n";
    for (const auto& n : rec.nodes) {
        out << n.t;
        for (int i = 0; i < d; ++i) out << ',' << (n.accepted ? n.jet.image(i) : std::nan(""));
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) out << ',' << (n.accepted ? n.jet.linear(i, j) : std::nan(""));
        }
        out << ',' << n.residual << ',';
        for (std::size_t f = 0; f < n.flags.size(); ++f) out << (f ? ";" : "") << n.flags[f];
        out << '\n';
    }
    return out.str();
}

}  // namespace isojet
