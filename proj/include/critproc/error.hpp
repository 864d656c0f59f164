// Copyright 2026 The critproc Authors.
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
#include <string_view>

namespace critproc {

// Failure categories. The CLI maps config-class codes to exit status 2 and
// everything else to exit status 3.
enum class Errc {
  // data
  kMissingColumn,
  kMissingRows,
  kTypeMismatch,
  kNonFiniteValue,
  kBadVectorLength,
  kClassTooSmall,
  kUnknownCategory,
  kEmptyDiskList,
  kMissingSourceColumn,
  kColumnAlreadyPresent,
  kNonFiniteInput,
  kKOutOfRange,
  kDimensionMismatch,
  kEmptyData,
  kLabelOutOfRange,
  kZeroVarianceTarget,
  kZeroTargetValue,
  kTooManyFeatures,
  kIoError,
  // config
  kInvalidConfig,
  kInvalidSchema,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kMissingColumn: return "MissingColumn";
    case Errc::kMissingRows: return "MissingRows";
    case Errc::kTypeMismatch: return "TypeMismatch";
    case Errc::kNonFiniteValue: return "NonFiniteValue";
    case Errc::kBadVectorLength: return "BadVectorLength";
    case Errc::kClassTooSmall: return "ClassTooSmall";
    case Errc::kUnknownCategory: return "UnknownCategory";
    case Errc::kEmptyDiskList: return "EmptyDiskList";
    case Errc::kMissingSourceColumn: return "MissingSourceColumn";
    case Errc::kColumnAlreadyPresent: return "ColumnAlreadyPresent";
    case Errc::kNonFiniteInput: return "NonFiniteInput";
    case Errc::kKOutOfRange: return "KOutOfRange";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kEmptyData: return "EmptyData";
    case Errc::kLabelOutOfRange: return "LabelOutOfRange";
    case Errc::kZeroVarianceTarget: return "ZeroVarianceTarget";
    case Errc::kZeroTargetValue: return "ZeroTargetValue";
    case Errc::kTooManyFeatures: return "TooManyFeatures";
    case Errc::kIoError: return "IoError";
    case Errc::kInvalidConfig: return "InvalidConfig";
    case Errc::kInvalidSchema: return "InvalidSchema";
  }
  return "Unknown";
}

constexpr bool is_config_error(Errc code) {
  return code == Errc::kInvalidConfig || code == Errc::kInvalidSchema;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Cell-addressed data error; `row` is the 1-based data row (header excluded).
class CellError : public Error {
 public:
  CellError(Errc code, std::size_t row, std::string column)
      : Error(code, "row " + std::to_string(row) + ", column '" + column + "'"),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace critproc
