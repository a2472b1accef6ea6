#pragma once

#include <stdexcept>
#include <string>

namespace addidec {

// Exit-code mapping lives in the CLI: ConfigError -> 2, DataError family -> 3,
// NumericError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

// magic/version mismatch or malformed structure
struct FormatError : DataError {
  using DataError::DataError;
};

// file shorter than its header promises
struct TruncationError : DataError {
  using DataError::DataError;
};

struct ChecksumError : DataError {
  using DataError::DataError;
};

// NaN poisoning, diverged runs
struct NumericError : Error {
  using Error::Error;
};

// violated operation precondition (empty request, boundary proximity, ...)
struct PreconditionError : Error {
  using Error::Error;
};

// operation not supported by the given object (e.g. per-block renderings of a
// monolithic decoder)
struct CapabilityError : Error {
  using Error::Error;
};

// statistic undefined on the given data (constant input, zero-variance target)
struct UndefinedStatError : Error {
  using Error::Error;
};

// centroid inversion impossible (zero channel mass)
struct InversionError : Error {
  using Error::Error;
};

}  // namespace addidec
