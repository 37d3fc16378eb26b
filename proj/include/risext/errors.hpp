// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace risext {

/// Bad or inconsistent user configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Sampling rate that no integer stride pair can realise on the array.
struct UnsupportedRateError : ConfigError {
  using ConfigError::ConfigError;
};

/// Malformed, truncated or incompatible file.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File that cannot be opened, read or written.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Data that cannot be used, e.g. an all-zero training set.
struct DegenerateDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace risext
