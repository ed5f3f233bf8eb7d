#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace arff {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched vector/matrix shapes or point dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values (negative step sizes, bad probability vectors, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A ratio whose denominator vanished (all-zero truth vector, empty set).
class ZeroDenominatorError : public Error {
 public:
  using Error::Error;
};

/// Every aggregated amplitude fell below the cutoff.
class EmptyCutoffError : public Error {
 public:
  using Error::Error;
};

/// A sampling density vanishes where the spectrum does not, so C_p is infinite.
class SupportError : public Error {
 public:
  using Error::Error;
};

/// Iterative or direct solver failure.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, int iterations, double residual)
      : Error(what), iterations_(iterations), residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed IDX stream.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class CountMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace arff
