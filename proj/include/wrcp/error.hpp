#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wrcp {

/// Precondition or argument-domain violation.
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Too few samples for the requested estimator.
class InsufficientDataError : public DomainError {
public:
  using DomainError::DomainError;
};

/// Inputs are valid individually but jointly degenerate (all rows identical,
/// all weights zero, ...).
class DegenerateInputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Rank correlation is undefined because one input has zero rank variance.
class UndefinedCorrelationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure during training or selection.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

} // namespace wrcp
