// Copyright 2026 The kgsome Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace kgsome {

// Every error raised by the library derives from Error so callers (the CLI in
// particular) can separate library failures from programming errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error { using Error::Error; };
class LookupError : public Error { using Error::Error; };
class SamplingError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class EvalError : public Error { using Error::Error; };
class DatasetError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };

class CheckpointError : public Error { using Error::Error; };
class KindMismatchError : public CheckpointError { using CheckpointError::CheckpointError; };
class VersionError : public CheckpointError { using CheckpointError::CheckpointError; };

}  // namespace kgsome
