#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace mfh {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data or configuration violates a model precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A factorization or solve failed on numerically pathological input.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonPositiveDefiniteD : public ValidationError {
 public:
  NonPositiveDefiniteD(std::string area_id, const std::string& detail)
      : ValidationError("sampling covariance of area '" + area_id +
                        "' is not symmetric positive definite: " + detail),
        area_id_(std::move(area_id)) {}

  const std::string& area_id() const noexcept { return area_id_; }

 private:
  std::string area_id_;
};

class RankDeficientX : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::string file, std::size_t line, const std::string& detail)
      : ValidationError(file + ":" + std::to_string(line) + ": " + detail),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class MissingArea : public ValidationError {
 public:
  explicit MissingArea(std::string area_id)
      : ValidationError("area '" + area_id +
                        "' has no matching sampling covariance row"),
        area_id_(std::move(area_id)) {}

  const std::string& area_id() const noexcept { return area_id_; }

 private:
  std::string area_id_;
};

class SingularInformation : public NumericError {
 public:
  using NumericError::NumericError;
};

class EigenFailure : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace mfh
