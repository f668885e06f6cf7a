#pragma once

#include <stdexcept>
#include <string>

namespace plb {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A document does not match the expected schema (unknown key, wrong type).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A structurally valid object violates a domain invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// A precondition on arguments failed (out of bounds, singular design, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Arithmetic could not be carried out (non-finite sample, undefined divergence).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File system or file-format failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace plb
