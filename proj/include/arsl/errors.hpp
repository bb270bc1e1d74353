// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace arsl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, bad shapes, or bad command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite losses or gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Geometric precondition violated (degenerate box, location outside box).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Malformed structured-text input; the message names the offending line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, truncated or version-mismatched binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Requested computation is undefined for the given input.
class UndefinedError : public Error {
 public:
  using Error::Error;
};

}  // namespace arsl
