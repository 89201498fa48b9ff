#pragma once

#include <stdexcept>
#include <string>

namespace boxdeconv {

// Input has the wrong length or shape for the requested operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A dense-storage or combinatorial guard would be exceeded.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// A documented precondition was violated (e.g. a vector that must lie in
// the operator kernel does not).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file contents.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The measurement has no feasible preimage. Carries the residual of the
// best unconstrained least-squares fit as evidence.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double ls_residual)
      : std::runtime_error(what), least_squares_residual(ls_residual) {}

  double least_squares_residual = 0.0;
};

// An iteration produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace boxdeconv
