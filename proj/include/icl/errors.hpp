#pragma once

#include <stdexcept>
#include <string>

namespace icl {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible shapes between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation (non-PSD matrix,
/// singular Omega, zero matrix where a positive eigenvalue is required, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration; message names the key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace icl
