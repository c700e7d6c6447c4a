// Copyright 2026 The River Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace river {

// Coarse failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
    Config,    // invalid configuration, flags, or preconditions
    Io,        // filesystem and model-file problems
    Capacity,  // cache or context capacity exceeded
    State,     // internal state violated (double write, missing saved state)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& what) : Error(ErrorKind::Capacity, what) {}
};

class StateError : public Error {
public:
    explicit StateError(const std::string& what) : Error(ErrorKind::State, what) {}
};

// Raised when two operands of a kernel disagree on shape.
class DimensionError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

// Model-file decoding failures, one reason per distinct corruption.
enum class FormatFault { BadMagic, VersionMismatch, Truncated, ShapeMismatch };

class FormatError : public IoError {
public:
    FormatError(FormatFault fault, const std::string& what) : IoError(what), fault_(fault) {}

    FormatFault fault() const noexcept { return fault_; }

private:
    FormatFault fault_;
};

}  // namespace river
