#pragma once

#include <stdexcept>
#include <string>

namespace bassmle {

/// Argument outside the mathematical domain of an operation (index out of
/// range, time outside a price path, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Parameter values that violate a model invariant (nonpositive rates,
/// alpha <= beta when a transform is requested, malformed configs).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Too few adoptions for the requested estimate.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bassmle
