#pragma once

#include <stdexcept>
#include <string>

namespace symph {

/// Input violates a precondition (wrong degree, mismatched dimension, ...).
struct DomainError : std::invalid_argument {
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Two routes that must agree (by construction) disagreed beyond tolerance.
/// Signals an internal convention bug, not bad user input.
struct ConsistencyError : std::logic_error {
  explicit ConsistencyError(const std::string& what) : std::logic_error(what) {}
};

/// A solve was requested for data outside the solvable range
/// (e.g. d-preimage of a non-exact field).
struct NotSolvableError : std::runtime_error {
  explicit NotSolvableError(const std::string& what) : std::runtime_error(what) {}
};

/// A geometric degeneracy persisted after the allowed number of retries.
struct DegeneracyError : std::runtime_error {
  explicit DegeneracyError(const std::string& what) : std::runtime_error(what) {}
};

/// A certificate or verification step failed.
struct CertificationError : std::runtime_error {
  explicit CertificationError(const std::string& what) : std::runtime_error(what) {}
};

/// A piecewise-linear approximation could not meet the requested error budget.
struct RefinementError : std::runtime_error {
  explicit RefinementError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace symph
