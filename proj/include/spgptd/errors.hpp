#pragma once

#include <stdexcept>
#include <string>

namespace spgptd {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Matrix could not be factorized as SPD, even after jitter escalation.
struct NotPositiveDefinite : Error {
  using Error::Error;
};

// Bordered extension hit a vanishing Schur complement. Usually means a
// duplicate (or near-duplicate) support point was appended.
struct DegenerateBorder : Error {
  using Error::Error;
};

// A maintained quantity left its valid range (non-positive noise diagonal,
// vanishing rank-one denominator, variance below tolerance, ...).
struct NumericalDegeneracy : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct InvalidShape : Error {
  using Error::Error;
};

struct InvalidDiscount : Error {
  using Error::Error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct EmptyActionSet : Error {
  using Error::Error;
};

struct InvalidAction : Error {
  using Error::Error;
};

struct NotFinite : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace spgptd
