#pragma once

#include <stdexcept>
#include <string>

namespace copos {

/// Argument outside the mathematical domain of an operation (e.g. x1 <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A premise sector with max == min; membership grades are undefined.
class DegenerateSectorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Membership vector off the probability simplex.
class SimplexViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An integration stage produced non-finite values.
class StepRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace copos
