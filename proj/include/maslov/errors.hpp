#pragma once

// Exception taxonomy shared by the whole library.  The CLI maps these to
// process exit codes: configuration problems -> 2, certification mismatch
// -> 1, numerical breakdowns -> 3.

#include <stdexcept>
#include <string>

namespace maslov {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed caller input: wrong sizes, asymmetric matrices, bad options.
struct InvalidInput : Error {
  using Error::Error;
};

/// A linear solve hit a (numerically) singular matrix.
struct SingularMatrix : Error {
  using Error::Error;
};

/// A Lagrangian subspace was not transversal to the requested coordinate
/// plane, i.e. it lies outside the chart's domain.
struct ChartDomain : Error {
  using Error::Error;
};

/// Evaluation of a curvature profile outside its time domain.
struct ProfileDomain : Error {
  using Error::Error;
};

/// An iteration failed to converge, a tolerance was exceeded, or a
/// degeneracy could not be resolved at maximal refinement.
struct NumericalFailure : Error {
  using Error::Error;
};

/// A train crossing coincides with a path endpoint; the caller must shift
/// the endpoint before counting.
struct EndpointDegenerate : Error {
  using Error::Error;
};

/// A loop handed to loop_index is not closed (consecutive edge endpoints
/// span different subspaces).
struct InvalidLoop : Error {
  using Error::Error;
};

/// A rectangle specification violates its preconditions (e.g. the lambda
/// floor is not below the spectrum bound).
struct InvalidSpec : Error {
  using Error::Error;
};

/// Configuration file rejected: JSON syntax, unknown keys, bad values.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace maslov
