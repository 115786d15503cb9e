#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace qpool {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric argument violates an operation's precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// The requested run is inconsistent with its inputs (e.g. mMPA without scores).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Input data cannot support the computation (empty cohort, N < K, bad rows).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Scores carry no ordering information (fewer than two distinct values).
class DegenerateScoreError : public DataError {
 public:
  using DataError::DataError;
};

/// A cohort file row failed to parse or validate.
class CohortFormatError : public DataError {
 public:
  CohortFormatError(std::size_t row, std::string column, const std::string& what)
      : DataError("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

/// An estimator could not produce a usable value (e.g. too many failed resamples).
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Process exit code associated with an error category.
inline int exit_code_for(const Error& e) noexcept {
  if (dynamic_cast<const EstimationError*>(&e) != nullptr) return 4;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return 3;
  return 2;
}

}  // namespace qpool
