#pragma once

#include <stdexcept>
#include <string>

namespace hypolab {

/// Point lies outside the chart domain of a structure.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid argument to an operation (empty sample set, bad grid, ...).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Bracket span did not reach full rank within the requested depth.
struct NotBracketGenerating : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A Monte Carlo procedure cannot reach a usable sample size.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Too few usable samples for an estimator.
struct InsufficientSamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hypolab
