// Copyright 2026 The UDSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace udse {

enum class ErrorKind {
  kParse,
  kUnsupportedFormat,
  kIo,
  kConfig,
  kRange,
  kDegenerateInput,
  kRuntime,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed container; carries the byte offset where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(std::uint64_t offset, const std::string& message)
      : Error(ErrorKind::kParse,
              message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class UnsupportedFormat : public Error {
 public:
  explicit UnsupportedFormat(const std::string& message)
      : Error(ErrorKind::kUnsupportedFormat, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::kIo, message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ErrorKind::kConfig, message) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& message)
      : Error(ErrorKind::kRange, message) {}
};

class DegenerateInput : public Error {
 public:
  explicit DegenerateInput(const std::string& message)
      : Error(ErrorKind::kDegenerateInput, message) {}
};

}  // namespace udse
