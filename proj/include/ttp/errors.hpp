#pragma once

#include <stdexcept>
#include <string>

namespace ttp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension or index mismatch between inputs.
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Argument outside its mathematical domain.
struct DomainError : Error {
  using Error::Error;
};

// Bad enum value, unknown key, inconsistent configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Unsupported architecture for the requested operation.
struct UnsupportedError : Error {
  using Error::Error;
};

// Indefinite matrix where a positive definite one was required.
struct SpectralError : Error {
  using Error::Error;
};

// Privacy budget outside the admissible range.
struct BudgetError : Error {
  using Error::Error;
};

// A stated precondition does not hold (reports the violated requirement).
struct PreconditionError : Error {
  using Error::Error;
};

// Optimization diverged or failed.
struct TrainingError : Error {
  using Error::Error;
};

// Malformed input file.
struct FormatError : Error {
  using Error::Error;
};

}  // namespace ttp
