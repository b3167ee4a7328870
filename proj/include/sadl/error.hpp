#pragma once

#include <stdexcept>
#include <string>

namespace sadl {

//! Bad parameters or inputs (exit code 2 at the command line).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

//! Numerical failure during a run: non-finite state, diverged path, etc. (exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EigenSolverError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

//! Requested computation needs a capability the inputs lack (e.g. closed forms
//! that exist only for Gaussian innovations).
class UnsupportedCapability : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sadl
