#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace muplab {

/// Base class for every error raised by the library.
///
/// `ValidationError` marks problems with caller-supplied input (bad shapes,
/// bad configs, violated preconditions); the CLI maps these to exit code 1.
/// Everything else is a runtime failure (exit code 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonSymmetric : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class InvalidCoefficients : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonSmoothActivation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ResidualUnderflow : public Error {
 public:
  using Error::Error;
};

class NumericalDivergence : public Error {
 public:
  NumericalDivergence(std::size_t step, const std::string& what)
      : Error("numerical divergence at step " + std::to_string(step) + ": " +
              what),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class ZeroInitialFeature : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class CovarianceNotPD : public Error {
 public:
  using Error::Error;
};

class NonFiniteParticle : public Error {
 public:
  using Error::Error;
};

class ResourceLimit : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class FileFormat : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InsufficientSamples : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class AssumptionUnsatisfiable : public Error {
 public:
  using Error::Error;
};

class EmptySelection : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace muplab
