#pragma once

#include <stdexcept>

namespace sml {

// Error taxonomy shared by all modules. The CLI maps these onto its exit-code
// contract: 1 usage/validation, 2 theorem precondition unmet, 3 numerical
// failure.

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad values (out-of-range parameters, contradicted declarations).
class DomainError : public UsageError {
 public:
  using UsageError::UsageError;
};

// A hypothesis required by one of the limit theorems could not be verified
// for the given inputs (non-power-law decay, divergent moment, empty class
// membership, ...).
class TheoremError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical machinery failed (indefinite embedding, non-finite integrand).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sml
