#pragma once

#include <stdexcept>
#include <string>

namespace magtomo {

// Invalid field or configuration data (non-unitary gauge, non-real metric
// factor, boundary condition violated, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A geodesic failed to leave the disk within the flow-time cap.  Systems
// producing this are rejected as non-simple.
struct TrappedGeodesicError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// No admissible constant made the Jacobi combination nonvanishing.
struct ConjugatePointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Configuration file problems; carries a position when one is known.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& msg, int line_ = -1, int column_ = -1)
      : std::runtime_error(msg), line(line_), column(column_) {}
  int line;
  int column;
};

}  // namespace magtomo
