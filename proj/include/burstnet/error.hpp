/**
 * Copyright 2026 The burstnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace burstnet {

/// Process exit codes used by the command-line tool.
enum class ErrorKind { kConfig = 2, kData = 3, kNumeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

/// Cached artifact was produced under a different configuration.
struct StaleCacheError : ConfigError {
  explicit StaleCacheError(const std::string& what) : ConfigError("stale cache: " + what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

struct DimensionError : DataError {
  explicit DimensionError(const std::string& what) : DataError("dimension error: " + what) {}
};

struct ChannelError : DataError {
  explicit ChannelError(const std::string& what) : DataError("channel error: " + what) {}
};

/// Violated precondition on shapes, roles or model wiring.
struct ContractError : DataError {
  explicit ContractError(const std::string& what) : DataError("contract error: " + what) {}
};

class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : DataError("format error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("parse error at line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct MappingError : DataError {
  explicit MappingError(const std::string& what) : DataError("mapping error: " + what) {}
};

struct BalanceError : DataError {
  explicit BalanceError(const std::string& what) : DataError("balance error: " + what) {}
};

struct CoverageError : DataError {
  explicit CoverageError(const std::string& what) : DataError("coverage error: " + what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

/// ROC AUC requested on a single-class sample.
struct UndefinedMetricError : NumericError {
  explicit UndefinedMetricError(const std::string& what) : NumericError("undefined metric: " + what) {}
};

}  // namespace burstnet
