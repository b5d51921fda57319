#pragma once

#include <stdexcept>
#include <string>

namespace lrb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise malformed numeric input.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (out-of-range parameter, non-PSD covariance, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Iterative kernel stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A diagnostic needs simulation data that was not recorded.
class DiagnosticUnavailable : public Error {
 public:
  using Error::Error;
};

}  // namespace lrb
