#pragma once

#include <stdexcept>
#include <string>

namespace contagion {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Beta mixing law requested with std_dev^2 >= mean (1 - mean).
class VarianceTooLarge : public DomainError {
 public:
  using DomainError::DomainError;
};

// A moment sequence is shorter than the order an operation needs.
class InsufficientOrder : public Error {
 public:
  using Error::Error;
};

// A computed probability left [0,1] or a table broke its ordering.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class SizeLimitExceeded : public Error {
 public:
  using Error::Error;
};

// Two independent routes disagreed beyond tolerance.
class CrossCheckFailure : public Error {
 public:
  using Error::Error;
};

class PricingError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, int line, const std::string& field,
             const std::string& message)
      : Error(source + ":" + std::to_string(line) +
              (field.empty() ? "" : " [" + field + "]") + ": " + message),
        line_(line),
        field_(field) {}

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

}  // namespace contagion
