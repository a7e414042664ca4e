#ifndef ROINET_ERRORS_HPP
#define ROINET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace roinet {

// Base class for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape disagreements.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid geometry or option values (non-integral conv output, odd pool
// extent, unknown config keys, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Violated call preconditions (non-scalar loss, label out of range, ...).
struct ContractError : Error {
  using Error::Error;
};

// A Var that does not belong to the tape it is used with.
struct LookupError : Error {
  using Error::Error;
};

// Dataset-level problems (empty class, missing spot pixels, ...).
struct DataError : Error {
  using Error::Error;
};

// Malformed files (PPM/PGM/checkpoint/CSV).
struct FormatError : Error {
  using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
  using Error::Error;
};

// Divergence during an optimization run.
struct TrainingError : Error {
  using Error::Error;
};

// NaN/Inf produced by a forward or backward computation.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace roinet

#endif  // ROINET_ERRORS_HPP
