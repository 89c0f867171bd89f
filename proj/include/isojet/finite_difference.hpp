#pragma once

#include <span>
#include <vector>

namespace isojet {

/// Fornberg weights: w[k][j] approximates the k-th derivative at z from
/// samples at nodes[j], for k = 0..max_order.
std::vector<std::vector<double>> fornberg_weights(double z, std::span<const double> nodes, int max_order);

}  // namespace isojet
