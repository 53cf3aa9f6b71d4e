#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oscillax {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression source; carries the 0-based character offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " (at position " + std::to_string(position) + ")"),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Evaluation outside a function's domain, or a non-finite result.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Failure while evaluating over a grid; remembers the offending node.
class GridError : public Error {
 public:
  GridError(const std::string& what, std::size_t index)
      : Error(what + " (grid index " + std::to_string(index) + ")"), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// A parameter set violates one of the admissibility constraints.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or invalid run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace oscillax
