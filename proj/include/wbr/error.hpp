// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace wbr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input bytes are not in the expected file format (magic, layout, ranges).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A binary file ends before its header says it should.
class LengthError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Unsupported format version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Two inputs that must describe the same data disagree (e.g. image/label counts).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure; the message always carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value. `field()` names the offending key when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string field = {})
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A continual-learning protocol rule was broken (label leakage, duplicate memory class, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A per-class statistic was requested for a class without samples.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A metric over an empty set was requested.
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Run records that cannot be compared (different scenarios).
class ComparabilityError : public Error {
 public:
  using Error::Error;
};

/// Index outside a valid range.
class RangeError : public Error {
 public:
  using Error::Error;
};

}  // namespace wbr
