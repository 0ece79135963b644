#pragma once

#include <stdexcept>
#include <string>

namespace wflow {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the inputs was violated (dimension mismatch, bad step size, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An exact computation would exceed a configured size bound
/// (lcm of denominators, brute-force enumeration size, ...).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver stopped before meeting its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what + " (last residual " + std::to_string(last_residual) + ")"),
        last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// Bisection could not resolve a breakpoint; carries the bracketing interval.
class BisectionError : public Error {
 public:
  BisectionError(const std::string& what, double lo, double hi)
      : Error(what + " in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"),
        lo_(lo),
        hi_(hi) {}

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

}  // namespace wflow
