#pragma once

#include <stdexcept>
#include <string>

namespace kg {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad arguments / violated preconditions (grid sizes, parameter domains).
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(what) {}
};

// Two objects built on different grids were combined.
class GridMismatch : public Error {
 public:
  explicit GridMismatch(const std::string& what) : Error(what) {}
};

// Iterative method failed to reach its tolerance.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double last_increment)
      : Error(what), last_increment(last_increment) {}
  double last_increment;
};

// A symmetric operator expected to be positive semidefinite produced a
// negative Ritz value.
class IndefiniteOperator : public Error {
 public:
  IndefiniteOperator(const std::string& what, double ritz_value)
      : Error(what), ritz_value(ritz_value) {}
  double ritz_value;
};

// The scalar operator has spectrum at or below -m^2: the first-order system
// is no longer unitary and evolution-type operations refuse to run.
class SupercriticalPotential : public Error {
 public:
  SupercriticalPotential(const std::string& what, double lambda_min)
      : Error(what), lambda_min(lambda_min) {}
  double lambda_min;
};

// Requested evolution horizon would let the wavefront wrap around the box.
class HorizonExceeded : public Error {
 public:
  explicit HorizonExceeded(const std::string& what) : Error(what) {}
};

// Quadrature tail / refinement estimate above tolerance.
class QuadratureFailure : public Error {
 public:
  explicit QuadratureFailure(const std::string& what) : Error(what) {}
};

}  // namespace kg
