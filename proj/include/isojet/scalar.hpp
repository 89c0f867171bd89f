#pragma once

// Helpers for code templated on the scalar type (double or Jet).

#include <cmath>

#include "isojet/jets.hpp"

namespace isojet {

inline double constant_part(double x) { return x; }
inline double constant_part(const Jet& x) { return x.value(); }

/// A constant with the same jet shape as `like`.
inline double constant_like(double, double c) { return c; }
inline Jet constant_like(const Jet& like, double c) { return Jet::constant(like.dim_in(), like.degree(), c); }

}  // namespace isojet
