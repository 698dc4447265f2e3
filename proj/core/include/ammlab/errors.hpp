#pragma once

#include <stdexcept>
#include <string>

namespace ammlab {

/// Argument outside the mathematical domain of an operation (negative
/// amounts, non-finite values, off-simplex weights, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller violated a documented precondition that is not a pure domain
/// restriction, e.g. minting at a reserve ratio that does not match the pool.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mismatched shapes between cooperating objects (stream vs. params, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A numerical procedure failed (singular solve, non-finite objective).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant that should be impossible by construction broke.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ammlab
