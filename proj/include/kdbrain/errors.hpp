#pragma once

#include <stdexcept>
#include <string>

namespace kdbrain {

// Bad input: malformed files, inconsistent shapes, out-of-range settings.
// The CLI maps these to exit status 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Operation asked of a value outside its domain (empty reduction, single-class AUC, ...).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UsageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Failures detected while computing: non-finite gradients, I/O on write.
// The CLI maps these to exit status 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kdbrain
