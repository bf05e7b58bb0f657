#pragma once

#include <stdexcept>
#include <string>

namespace sclm {

/// Base of every error raised by the library. The CLI maps subclasses to
/// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes that do not conform for a primitive.
class DimensionError : public Error {
 public:
  DimensionError(std::string primitive, const std::string& detail)
      : Error(primitive + ": " + detail), primitive_(std::move(primitive)) {}
  const std::string& primitive() const { return primitive_; }

 private:
  std::string primitive_;
};

/// Caller violated an operation's contract (wrong arity, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Bad user-facing input: token ids out of range, over-long prompts, ...
class InputError : public Error {
 public:
  using Error::Error;
};

/// Argument outside an allowed range (e.g. schedule step past the end).
class RangeError : public Error {
 public:
  using Error::Error;
};

/// NaN / Inf encountered in training state.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (model, growth, experiment).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or unusable data files, empty suites, degenerate batches.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace sclm
