// Error taxonomy shared by the library and the CLI. The CLI maps each
// category to a distinct process exit code (see tools/shark.cpp).
#pragma once

#include <stdexcept>
#include <string>

namespace shark {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values (bad thresholds, empty meta, ...). Exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures: missing files, unwritable paths. Exit code 3.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. Messages carry the byte offset (binary formats)
// or line number (CSV). Exit code 4.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a contract (out-of-range category index,
// negative counts, empty dataset where one is required). Exit code 5.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Row/table id out of range.
class LookupError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Non-finite values where finite reals are required.
class NumericError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Broken internal invariant (mismatched shapes between forward and backward).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace shark
