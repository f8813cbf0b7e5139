// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vrae {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input bytes (MIDI, roll files, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that uses a feature this library does not handle.
class UnsupportedFormat : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Invalid or conflicting configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vrae
