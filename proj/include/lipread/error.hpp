// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lipread {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not agree with what the operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of the operation (log of a
/// non-positive value, non-positive epsilon, bad config value, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A function that must produce finite values produced NaN or Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// The CTC target needs more frames than the input provides.
class InfeasibleTarget : public Error {
 public:
  InfeasibleTarget(std::size_t frames, std::size_t required)
      : Error("CTC target needs at least " + std::to_string(required) +
              " frames, input has " + std::to_string(frames)),
        frames_(frames),
        required_(required) {}

  std::size_t frames() const noexcept { return frames_; }
  std::size_t required() const noexcept { return required_; }

 private:
  std::size_t frames_;
  std::size_t required_;
};

enum class DataErrorKind {
  Io,
  BadMagic,
  UnsupportedVersion,
  Truncated,
  DimsOverflow,
  ValueOutOfRange,
  Unsupported,
  ParseError,
  UnknownSymbol,
  NameCollision,
  MissingParameter,
  ShapeMismatch,
};

const char* to_string(DataErrorKind kind) noexcept;

/// Failure while reading or writing one of the on-disk formats.
/// `position` is a byte offset, line number or symbol position depending on
/// the kind; the message says which.
class DataError : public Error {
 public:
  DataError(DataErrorKind kind, const std::string& what,
            std::size_t position = 0)
      : Error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        position_(position) {}

  DataErrorKind kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return position_; }

 private:
  DataErrorKind kind_;
  std::size_t position_;
};

}  // namespace lipread
