// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace wg {

// Shape/axis violations in tensor ops. Messages name both shapes.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf produced by a forward op, or detected in a loss.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid model / run configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Base for file format failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class FormatError : public IoError {
 public:
  explicit FormatError(const std::string& msg) : IoError(msg) {}
};

class VersionError : public IoError {
 public:
  explicit VersionError(const std::string& msg) : IoError(msg) {}
};

class TruncatedError : public IoError {
 public:
  explicit TruncatedError(const std::string& msg) : IoError(msg) {}
};

class ChecksumError : public IoError {
 public:
  explicit ChecksumError(const std::string& msg) : IoError(msg) {}
};

}  // namespace wg
