#pragma once

#include <stdexcept>
#include <string>

namespace selfsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad grid or solver setup (too coarse, window unresolved, ...).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

// Parameter outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller misuse: mismatched grids, wrong parity, ...
class UsageError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

// An iterative solve did not converge or hit a degenerate system.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

// Bad configuration input; line is 0 when not tied to a file line.
class SchemaError : public Error {
 public:
  SchemaError(std::string field, int line, const std::string& what)
      : Error(what), field_(std::move(field)), line_(line) {}
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_ = 0;
};

}  // namespace selfsim
