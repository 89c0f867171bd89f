#pragma once

// Geodesics of chart metrics: Christoffel symbols, exponential and log maps,
// the differential of exp, and jet transport of the geodesic flow.

#include <vector>

#include "isojet/jet_matrix.hpp"
#include "isojet/jets.hpp"
#include "isojet/metric.hpp"
#include "isojet/ode.hpp"

namespace isojet {

/// gamma[k](i, j) = Gamma^k_ij at p.
std::vector<Mat> christoffel(const ChartMetric& m, const Vec& p);

/// Taylor expansion of the Christoffel symbols about p (displacement
/// variables) to `order`; entry [k](i, j).
std::vector<JetMatrix> christoffel_expansion(const ChartMetric& m, const Vec& p, int order);

/// exp_p(v): the geodesic with initial data (p, v) at parameter 1. Throws
/// RegionError when the geodesic leaves the region.
Vec exp_map(const ChartMetric& m, const Vec& p, const Vec& v, const OdeOptions& opt = {});

struct GeodesicSample {
    double s = 0.0;
    Vec position;
    Vec velocity;
};

/// Geodesic from (p, v) sampled at `count` + 1 equally spaced parameters in [0, s_end].
std::vector<GeodesicSample> geodesic_path(const ChartMetric& m, const Vec& p, const Vec& v, double s_end, int count,
                                          const OdeOptions& opt = {});

struct ExpDifferential {
    Vec point;
    /// d(exp_p) at v, from the variational equations.
    Mat jacobian;
};

ExpDifferential exp_with_differential(const ChartMetric& m, const Vec& p, const Vec& v, const OdeOptions& opt = {});

/// Degree-`degree` jet in y of y -> exp_p(v0 + L y), by integrating the
/// geodesic equations with jet-valued state ("jet transport").
JetMap exp_jet(const ChartMetric& m, const Vec& p, const Vec& v0, const Mat& linear, int degree,
               const OdeOptions& opt = {});

struct LogOptions {
    int max_iterations = 40;
    /// Stop when |exp_p(v) - q| <= tolerance * (1 + |q|).
    double tolerance = 1e-12;
    OdeOptions ode;
};

/// v with exp_p(v) = q by damped Newton shooting from v = q - p. Throws
/// ConvergenceError when shooting fails (q is likely outside a normal ball).
Vec log_map(const ChartMetric& m, const Vec& p, const Vec& q, const LogOptions& opt = {});

/// |log_p(q)|_{g(p)}
double distance(const ChartMetric& m, const Vec& p, const Vec& q, const LogOptions& opt = {});

/// g-norm of v at p.
double metric_norm(const ChartMetric& m, const Vec& p, const Vec& v);

struct InjectivityOptions {
    int directions = 512;
    int radii = 16;
    /// Largest admissible condition number of d(exp) on the net.
    double max_condition = 1e8;
    /// Images closer than this (relative to the region scale) count as equal.
    double coincidence = 1e-9;
    OdeOptions ode;
};

/// Largest tested radius r <= r_max such that on the net of g-unit
/// directions times radii r_max * k / radii (k = 1..radii, up to r) the
/// differential of exp_p stays nonsingular with positive determinant and the
/// images are pairwise distinct. A sampled floor, not the true injectivity
/// radius. Returns 0 when even the smallest radius fails.
double injectivity_radius_floor(const ChartMetric& m, const Vec& p, double r_max, const InjectivityOptions& opt = {});

}  // namespace isojet
