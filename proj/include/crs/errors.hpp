#pragma once

#include <stdexcept>
#include <string>

namespace crs {

/// Bad or missing configuration (schema, config file, flags).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that violates a precondition (non-binary treatment, missing values, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every candidate rule was screened out.
class EmptyPoolError : public std::runtime_error {
 public:
  EmptyPoolError() : std::runtime_error("empty pool") {}
  using std::runtime_error::runtime_error;
};

/// Non-finite objective or similar numerical breakdown.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crs
