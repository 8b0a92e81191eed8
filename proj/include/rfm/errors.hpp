#pragma once

#include <stdexcept>
#include <string>

namespace rfm {

// Error categories. The CLI maps these onto process exit codes.

/// Malformed or out-of-range input (bad config value, non-PSD covariance, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A well-formed request outside the domain of an equation (e.g. ratio <= 1
/// when solving for kappa).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Configuration sits on a phase boundary where the asymptotic error diverges.
class BoundaryError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A root finder failed to bracket or converge.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense linear algebra hit a singular or inconsistent state.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rfm
