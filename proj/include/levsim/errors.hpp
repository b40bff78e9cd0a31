#ifndef LEVSIM_ERRORS_HPP
#define LEVSIM_ERRORS_HPP

#include <stdexcept>

namespace levsim {

// Numeric failures (as opposed to misconfiguration, which uses
// std::domain_error / std::invalid_argument): these indicate that a
// computation could not be trusted at the requested settings.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Truncated basis or grid too small for the requested state.
struct TruncationError : NumericError {
  using NumericError::NumericError;
};

// Result changed beyond tolerance when re-run at higher resolution.
struct ConvergenceError : NumericError {
  using NumericError::NumericError;
};

} // namespace levsim

#endif
