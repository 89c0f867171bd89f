#pragma once

// Built-in chart metrics and the string-keyed registry used by scenarios.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "isojet/metric.hpp"

namespace isojet {

/// phi(x) = amplitude * exp(-|x - center|^2 / (2 width^2))
struct GaussianBump {
    Vec center;
    double amplitude = 0.0;
    double width = 1.0;
};

MetricPtr make_euclidean(int dim, double half_width = 10.0);

/// exp(2 * sum of bumps) * I
MetricPtr make_conformal_scalar(int dim, std::vector<GaussianBump> bumps, double half_width = 2.0);

/// 4 / (1 - |x|^2)^2 * I on the unit disc.
MetricPtr make_poincare_disc();

/// Stereographic chart of the round sphere of the given radius:
/// 4 R^2 / (1 + |x|^2)^2 * I.
MetricPtr make_sphere_patch(int dim, double radius = 1.0, double half_width = 1.5);

/// Metric sampled at the nodes of a uniform lattice on `region` and
/// interpolated entrywise by tensor-product cubic B-splines. `nodes` is the
/// number of lattice nodes per axis (>= 4).
MetricPtr make_custom_grid(const Box& region, int nodes, const std::function<Mat(const Vec&)>& sample,
                           std::string name = "custom_grid");

/// Registry entry: string id plus numeric parameters (lists allowed).
struct MetricSpec {
    std::string id;
    std::map<std::string, std::vector<double>> params;
    /// For custom_grid: the metric whose values are sampled.
    std::shared_ptr<MetricSpec> source;

    double number(const std::string& key, double fallback) const;
};

/// Ids: euclidean, conformal_scalar, poincare_disc, sphere_patch, custom_grid.
/// Throws PreconditionError for unknown ids or malformed parameters.
MetricPtr make_builtin_metric(const MetricSpec& spec);

std::vector<std::string> builtin_metric_ids();

}  // namespace isojet
