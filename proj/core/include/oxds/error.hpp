/*
 * Copyright 2026 The OXDS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef OXDS_ERROR_HPP_
#define OXDS_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace oxds {

enum class ErrorKind {
  kZeroVector,
  kDimensionMismatch,
  kAntipodalInputs,
  kParseError,
  kDuplicateCategory,
  kDegeneratePrototypes,
  kUnknownCategory,
  kEmptyDataset,
  kInvalidArgument,
  kMissingMapper,
  kEmptyGallery,
  kNoRelevantItems,
  kInconsistentLabels,
  kEmptyInput,
  kRankDeficient,
  kTooFewSamples,
  kWidthMismatch,
  kInfeasibleSeparation,
  kMissingDomain,
  kMissingModel,
  kUnknownMetric,
  kInsufficientSupport,
  kIoError,
};

std::string_view error_kind_name(ErrorKind kind);

// All library failures are reported with this exception. Every kind is a
// validation failure of caller-supplied data or configuration.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace oxds

#endif  // OXDS_ERROR_HPP_
