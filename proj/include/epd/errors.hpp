#pragma once

#include <stdexcept>
#include <string>

namespace epd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of a function (e.g. negative density).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A model or tuning parameter is non-finite or violates a constraint.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// The integrand produced a non-finite value.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double abscissa)
      : Error(what), abscissa_(abscissa) {}
  double abscissa() const noexcept { return abscissa_; }

 private:
  double abscissa_;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be inverted is singular or badly conditioned.
class DegenerateMatrixError : public Error {
 public:
  DegenerateMatrixError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// Dataset parsing or validation failure.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace epd
