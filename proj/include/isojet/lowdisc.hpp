#pragma once

#include <cstddef>
#include <vector>

namespace isojet {

/// Additive-recurrence (Kronecker) sequence built from the generalized golden
/// ratio: point k has coordinates frac(offset + (k + 1) * alpha_i).
class KroneckerSequence {
public:
    explicit KroneckerSequence(int dim, double offset = 0.5);

    int dim() const { return static_cast<int>(alpha_.size()); }
    /// Point k in [0,1)^dim.
    std::vector<double> point(std::size_t k) const;
    void point(std::size_t k, double* out) const;

private:
    std::vector<double> alpha_;
    double offset_;
};

/// First `count` unit vectors of a nested low-discrepancy direction net in R^dim.
std::vector<std::vector<double>> direction_net(int dim, std::size_t count);

}  // namespace isojet
