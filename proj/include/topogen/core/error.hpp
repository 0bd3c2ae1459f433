#pragma once

#include <stdexcept>
#include <string>

namespace topogen {

// Error taxonomy shared by every module. All failures are thrown; callers
// that need exit codes (the CLI) translate at the boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument values (bad counts, out-of-range constants, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent data (shape mismatch, non-finite values).
class DataError : public Error {
 public:
  using Error::Error;
};

// Linear system could not be solved to contract.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Optimization step failed (e.g. volume bisection cannot bracket).
class OptimizationError : public Error {
 public:
  using Error::Error;
};

// Network spec does not compose.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Training produced non-finite state.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// On-disk artifact is corrupt or does not match its manifest.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Wrong API usage (missing cache, calling infer-only paths in train, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace topogen
