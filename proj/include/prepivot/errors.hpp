#pragma once

#include <stdexcept>
#include <string>

namespace prepivot {

// Base for all library errors. CLI maps subclasses to exit codes:
// config/usage problems -> 2, statistical input problems -> 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad argument values: k < 2, invalid probability vector, df = 0, ...
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Assignment length or group counts do not match the dataset.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Covariance input is not symmetric PSD within tolerance.
class CovarianceError : public Error {
 public:
  using Error::Error;
};

// A variance kernel was requested with fewer than 2 rows in some group.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// A statistic needs an inverse of a singular variance block. The engine maps
// this to +inf for bootstrap inner draws; on observed data it aborts the run.
class DegenerateStatisticError : public Error {
 public:
  using Error::Error;
};

// Invalid statistic/prepivot combination or malformed config/CSV input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Exact enumeration would exceed the configured cap.
class EnumerationTooLargeError : public Error {
 public:
  using Error::Error;
};

}  // namespace prepivot
