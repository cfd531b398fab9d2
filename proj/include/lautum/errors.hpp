#pragma once

#include <stdexcept>
#include <string>

namespace lautum {

// Base class for all library errors. CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid probability mass function (negative mass, bad normalization).
class DistributionError : public Error {
 public:
  using Error::Error;
};

// Incompatible matrix/tensor dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Value outside the mathematical domain of an operation
// (non-PD covariance, nonpositive determinant argument, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Mini-batch contract violations (size < 2, size != configured size).
class BatchError : public Error {
 public:
  using Error::Error;
};

// Bad data content: NaN/Inf entries, labels out of range, non-one-hot labels.
class DataError : public Error {
 public:
  using Error::Error;
};

// Forward cache no longer matches the parameters it was computed with.
class CacheError : public Error {
 public:
  using Error::Error;
};

// Malformed input file (IDX container, metrics CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Numerical failure (factorization breakdown after jitter, divergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lautum
