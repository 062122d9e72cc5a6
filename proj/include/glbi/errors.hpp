#pragma once

#include <stdexcept>
#include <string>

namespace glbi {

// All library failures derive from Error so callers can catch one type.
// The CLI maps IoError to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, bad configs, data that does not fit the requested model.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between a parameter and the model that owns it.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Non-finite inputs, empty datasets, singular blocks.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Iterates became non-finite or blew up.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// An iterative method ran out of its iteration budget.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace glbi
