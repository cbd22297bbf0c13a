#pragma once

#include <stdexcept>
#include <string>

namespace degen {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric argument lies outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input data breaks a structural contract (boundary values, mesh nesting, sizes).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// A ratio was requested for a zero vector.
class UndefinedRatio : public Error {
public:
    using Error::Error;
};

/// Boundary quantity requested on a part that touches the degenerate edge.
class UnsupportedRegion : public Error {
public:
    using Error::Error;
};

/// Initial datum is not admissible for the truncated problem.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Iterative solver failure or a singular system.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The boundary observation vanishes, so the observability ratio is undefined.
class DegenerateObservation : public Error {
public:
    using Error::Error;
};

/// A field was passed with the wrong time convention.
class ConventionError : public Error {
public:
    using Error::Error;
};

} // namespace degen
