#pragma once

// A pair of smooth metric families on a planar chart whose isometries jump:
// the source carries symmetry-breaking bumps switched on by exp(-s / |t|),
// and the target equals the source for t >= 0 and its reflection for t < 0.
// Both families agree with the flat metric to infinite order at t = 0, so
// they are smooth in t, while every isometry family is the identity on one
// side and the reflection on the other.

#include <vector>

#include "isojet/metric.hpp"

namespace isojet {

/// phi(x) = weight * exp(-|x - center|^2 / (2 width^2)) times a symmetric shape matrix.
struct FlipBump {
    Vec center;
    double weight = 1.0;
    double width = 0.35;
    Mat shape;
};

struct FlipOptions {
    double amplitude = 0.4;
    /// s in the profile exp(-s / |t|).
    double profile_scale = 0.1;
    double half_width = 1.5;
    double t_min = -1.0;
    double t_max = 1.0;
    /// Empty: three fixed bumps with no common symmetry.
    std::vector<FlipBump> bumps;
};

/// exp(-s / |t|), extended by 0 at t = 0.
double flip_profile(double t, double scale);

std::vector<FlipBump> default_flip_bumps();

struct FlipFamily {
    MetricFamily source;
    MetricFamily target;
    /// (x, y) -> (x, -y)
    Mat reflection;
};

/// g_t = I + amplitude p(t) sum_k phi_k S_k. Throws PreconditionError unless
/// amplitude * sum_k |weight_k| |S_k| < 1, which keeps g_t positive definite.
FlipFamily build_flip_family(const FlipOptions& opt = {});

}  // namespace isojet
