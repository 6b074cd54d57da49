#pragma once

#include <stdexcept>
#include <string>

namespace gmr3 {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data, schema or configuration.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Singular systems, degenerate quantifications and similar numerical failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An inner iterative procedure failed to reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace gmr3
