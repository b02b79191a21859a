#pragma once

#include <stdexcept>
#include <string>

namespace dyntomo {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A value violates a documented invariant (non-Hermitian, bad trace, bad index...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Record / scheme / observable-set mismatch.
class SchemeError : public Error {
 public:
  using Error::Error;
};

// A linear system the reconstruction refuses to solve.
class RefusedSystemError : public Error {
 public:
  using Error::Error;
};

class SingularSystemError : public RefusedSystemError {
 public:
  using RefusedSystemError::RefusedSystemError;
};

class IllConditionedError : public RefusedSystemError {
 public:
  IllConditionedError(const std::string& what, double condition)
      : RefusedSystemError(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

}  // namespace dyntomo
