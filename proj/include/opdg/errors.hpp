#pragma once

#include <stdexcept>
#include <string>

namespace opdg {

/// A solver could not produce a trustworthy numerical answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An identification problem has no solution under its constraints.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotStabilizable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  NoConvergence(const std::string& what, double residual, int iterations)
      : NumericalError(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class SolverFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class Diverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace opdg
