#pragma once

#include <stdexcept>
#include <string>

namespace ensdiv {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape incompatibility between operands; message names both shapes.
struct DimError : Error {
  using Error::Error;
};

// Value outside the mathematical domain of an operation (e.g. off-simplex
// probabilities, boundary point for a singular Hessian).
struct DomainError : Error {
  using Error::Error;
};

// Bad user-supplied configuration (unknown keys, invalid ranges).
struct ConfigError : Error {
  using Error::Error;
};

// File and parse failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace ensdiv
