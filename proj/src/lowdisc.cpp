#include "isojet/lowdisc.hpp"

#include <cmath>
#include <numbers>

#include "isojet/error.hpp"

namespace isojet {

KroneckerSequence::KroneckerSequence(int dim, double offset) : offset_(offset) {
    if (dim < 1) throw DimensionError("sequence dimension must be positive");
    // phi_d is the positive root of x^(d+1) = x + 1
    double phi = 2.0;
    for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dim + 1.0));
    alpha_.resize(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) alpha_[static_cast<std::size_t>(i)] = std::fmod(std::pow(1.0 / phi, i + 1), 1.0);
}

std::vector<double> KroneckerSequence::point(std::size_t k) const {
    std::vector<double> x(alpha_.size());
    point(k, x.data());
    return x;
}

void KroneckerSequence::point(std::size_t k, double* out) const {
    const double n = static_cast<double>(k + 1);
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
        const double v = offset_ + n * alpha_[i];
        out[i] = v - std::floor(v);
    }
}

std::vector<std::vector<double>> direction_net(int dim, std::size_t count) {
    std::vector<std::vector<double>> out;
    out.reserve(count);
    if (dim == 1) {
        for (std::size_t k = 0; k < count; ++k) out.push_back({k % 2 == 0 ? 1.0 : -1.0});
        return out;
    }
    if (dim == 2) {
        // golden-angle net; every prefix is nested in the longer ones
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (std::size_t k = 0; k < count; ++k) {
            const double a = golden * static_cast<double>(k);
            out.push_back({std::cos(a), std::sin(a)});
        }
        return out;
    }
    KroneckerSequence seq(dim, 0.0);
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (std::size_t k = 0; out.size() < count; ++k) {
        seq.point(k, x.data());
        double n2 = 0.0;
        for (double& v : x) {
            v = 2.0 * v - 1.0;
            n2 += v * v;
        }
        if (n2 > 1.0 || n2 < 1e-4) continue;
        const double inv = 1.0 / std::sqrt(n2);
        std::vector<double> u(x);
        for (double& v : u) v *= inv;
        out.push_back(std::move(u));
    }
    return out;
}

}  // namespace isojet
