#pragma once

#include <stdexcept>
#include <string>

namespace isojet {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes of operands disagree (jet dimensions, degrees, value sizes).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A point or a geodesic left the region where the metric is defined.
class RegionError : public Error {
public:
    using Error::Error;
};

/// An iterative method stopped without meeting its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// A matrix that must be invertible (or well conditioned) is not.
class SingularError : public Error {
public:
    using Error::Error;
};

/// Configuration or serialized input could not be understood.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace isojet
