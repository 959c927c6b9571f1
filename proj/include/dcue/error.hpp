#pragma once

#include <stdexcept>
#include <string>

namespace dcue {

// Error taxonomy. The CLI maps each family to its own exit code.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, configuration values or schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Any numerical breakdown: singular systems, non-convergence, degenerate fits.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The weighting matrix Omega(beta) could not be factored.
class SingularWeightingError : public NumericalError {
 public:
  SingularWeightingError(const std::string& what, double beta, double min_diag, double max_diag)
      : NumericalError(what), beta_(beta), min_diag_(min_diag), max_diag_(max_diag) {}

  double beta() const noexcept { return beta_; }
  double min_factor_diag() const noexcept { return min_diag_; }
  double max_factor_diag() const noexcept { return max_diag_; }

 private:
  double beta_;
  double min_diag_;
  double max_diag_;
};

/// Coordinate descent did not meet its tolerance.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double lambda) : NumericalError(what), lambda_(lambda) {}
  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

/// Variance or test statistics cannot be formed (e.g. non-positive curvature).
class InferenceUnavailableError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace dcue
