#pragma once

#include <stdexcept>
#include <string>

namespace mfgelec {

/// Root of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration or scenario violates a model invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller passed an argument outside an operation's domain.
class InputError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to reach its tolerance.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A condition that the construction guarantees could not hold.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfgelec
