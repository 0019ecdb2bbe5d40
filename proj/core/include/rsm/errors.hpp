#pragma once

#include <stdexcept>
#include <string>

namespace rsm {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration text or inconsistent run parameters.  CLI exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// Precondition violation on a numerical routine (bad spec, energy out of
// range, asymmetric grid, ...).  CLI exit code 2.
struct DomainError : Error {
  using Error::Error;
};

// An iterative procedure exhausted its budget or produced a diverging
// solution.  CLI exit code 3.
struct NonConvergence : Error {
  using Error::Error;
};

// Filesystem failures and refused overwrites.  CLI exit code 5.
struct IoError : Error {
  using Error::Error;
};

}  // namespace rsm
