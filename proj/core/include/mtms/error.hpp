// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mtms {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (zero norm, log of a non-positive value...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value that is not a shape problem.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced during training or gradient checking.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// On-disk dataset or checkpoint could not be read.
class FormatError : public Error {
 public:
  enum class Kind { kMalformedHeader, kMalformedRecord, kTruncatedPayload, kChecksumMismatch, kIo };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A pipeline stage was asked to resume but an upstream artifact is absent.
class StageError : public Error {
 public:
  using Error::Error;
};

}  // namespace mtms
