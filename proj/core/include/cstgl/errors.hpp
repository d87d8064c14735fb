// Copyright 2026 The cstgl Authors.
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

namespace cstgl {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree or an input is too short for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed input files (CSV, label files, metadata).
class IngestionError : public Error {
 public:
  using Error::Error;
};

// Inconsistent synthetic generator settings.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Checkpoint could not be read, or does not match the data it is used with.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during training or optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration (unknown key, unparsable value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cstgl
