#pragma once

#include <stdexcept>
#include <string>

namespace lodwave {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A size/level limit was exceeded (memory guard).
class CapacityError : public Error {
public:
  using Error::Error;
};

/// Inconsistent or invalid arguments (level mismatch, bad epsilon, ...).
class ArgumentError : public Error {
public:
  using Error::Error;
};

/// The mesh is too coarse to resolve the coefficient.
class ResolutionError : public Error {
public:
  using Error::Error;
};

/// A linear-algebra operation failed (non-SPD matrix, singular factorization,
/// residual above tolerance).
class NumericError : public Error {
public:
  using Error::Error;
};

/// A constraint system turned out degenerate (e.g. empty patch interior).
class DegenerateConstraintError : public Error {
public:
  using Error::Error;
};

/// Non-finite or blown-up state detected during time stepping. Carries the
/// step index at which the blow-up was observed.
class InstabilityError : public Error {
public:
  InstabilityError(int step, const std::string& msg) : Error(msg), step_(step) {}
  int step() const { return step_; }

private:
  int step_;
};

} // namespace lodwave
