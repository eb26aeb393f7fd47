#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace thinhomog {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---- expressions ----------------------------------------------------------

class SyntaxError : public Error {
public:
  SyntaxError(std::size_t position, const std::string& message)
      : Error("syntax error at position " + std::to_string(position) + ": " + message),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

class UnknownIdentifier : public Error {
public:
  UnknownIdentifier(std::size_t position, const std::string& name)
      : Error("unknown identifier '" + name + "' at position " + std::to_string(position)),
        name_(name) {}
  const std::string& name() const noexcept { return name_; }

private:
  std::string name_;
};

class UnboundVariable : public Error {
public:
  explicit UnboundVariable(const std::string& name)
      : Error("unbound variable '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

private:
  std::string name_;
};

class DomainError : public Error {
public:
  using Error::Error;
};

/// Raised when the derivative of abs (emitted as sign) is evaluated at its kink.
class NonDifferentiable : public DomainError {
public:
  using DomainError::DomainError;
};

// ---- geometry -------------------------------------------------------------

class GeometryError : public Error {
public:
  using Error::Error;
};

class EmptySection : public GeometryError {
public:
  using GeometryError::GeometryError;
};

class MultiComponent : public GeometryError {
public:
  using GeometryError::GeometryError;
};

class DegenerateSection : public GeometryError {
public:
  using GeometryError::GeometryError;
};

class DegenerateMap : public GeometryError {
public:
  using GeometryError::GeometryError;
};

// ---- finite elements / solvers --------------------------------------------

class NonSPD : public Error {
public:
  using Error::Error;
};

class ConflictingConstraints : public Error {
public:
  using Error::Error;
};

class NoConvergence : public Error {
public:
  NoConvergence(std::size_t iterations, double residual, const std::string& why = {})
      : Error("CG did not converge after " + std::to_string(iterations) +
              " iterations (relative residual " + std::to_string(residual) + ")" +
              (why.empty() ? std::string{} : ": " + why)),
        iterations_(iterations), residual_(residual) {}
  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

private:
  std::size_t iterations_;
  double residual_;
};

class CrossCheckFailure : public Error {
public:
  using Error::Error;
};

class OutOfDomain : public Error {
public:
  using Error::Error;
};

class ResolutionError : public Error {
public:
  using Error::Error;
};

// ---- configuration --------------------------------------------------------

class ConfigError : public Error {
public:
  using Error::Error;
};

class ValidationFailure : public Error {
public:
  using Error::Error;
};

} // namespace thinhomog
