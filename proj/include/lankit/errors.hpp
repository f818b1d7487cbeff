#pragma once

#include <stdexcept>
#include <string>

namespace lankit {

// Error taxonomy shared across the library. The CLI maps these onto its
// exit codes (config 2, io/format 3, numeric 4).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension or shape contract violation.
struct ShapeError : Error {
  using Error::Error;
};

// NaN/Inf values, divergence during optimization.
struct NumericError : Error {
  using Error::Error;
};

// Malformed file contents (bad magic, truncation, schema mismatch).
struct FormatError : Error {
  using Error::Error;
};

// Invalid configuration values.
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace lankit
