#pragma once

#include <stdexcept>
#include <string>

namespace casebench {

/// Raised for malformed or inconsistent input data and model files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid UTF-8 in document text.
class DecodeError : public DataError {
 public:
  using DataError::DataError;
};

/// A training procedure produced a non-finite quantity.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace casebench
