// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace hicast {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration (sizes, factors, schedule bounds).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Invalid call arguments: shapes, ranges, unknown enum values.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Operation called on an object that is not ready (untrained, frozen, missing stage).
class StateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents or inconsistent inputs on disk.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace hicast
