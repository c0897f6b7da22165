#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chn {

// Every failure the library can raise derives from Error so the CLI can map
// error classes onto exit codes in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration: layer specs that do not chain, invalid hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Vector or matrix dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input values outside the accepted domain (non-finite features, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file content. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Non-finite gradients or loss during optimization.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// A metric that has no defined value on the given input (e.g. MAP over zero
// eligible queries).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace chn
