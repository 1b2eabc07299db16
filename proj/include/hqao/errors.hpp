#pragma once

#include <stdexcept>
#include <string>

namespace hqao {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Integer or size overflow (block arithmetic, matrix sizes, spin counts).
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A truncated expansion (basis size, spectral sum) failed to converge.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// A quadratic form that must be positive definite is not.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// Root bracketing failed: no sign change on the supplied interval.
class BracketError : public Error {
 public:
  using Error::Error;
};

/// Metropolis proposal tuning could not reach the target acceptance window.
class TuningError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace hqao
