#pragma once

#include <stdexcept>
#include <string>

namespace structura {

// Malformed input: bad shapes, out-of-range indices, wrong parameter arity.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A graph or gold assignment that is well-formed but violates a model
// invariant (uncovered variable, disagreeing local assignments, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside a solver (non-finite iterate, infeasible QP).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace structura
