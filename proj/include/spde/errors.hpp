#pragma once

#include <stdexcept>
#include <string>

namespace spde {

/// Invalid or inconsistent configuration. The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure (blow-up, failed factorisation, out-of-regime formula).
/// The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No usable data on one side of x0: the normaliser of the random kernel is
/// not positive.
class DegenerateWindow : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace spde
