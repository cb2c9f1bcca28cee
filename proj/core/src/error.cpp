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

#include "oxds/error.hpp"

namespace oxds {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kZeroVector: return "ZeroVector";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kAntipodalInputs: return "AntipodalInputs";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kDuplicateCategory: return "DuplicateCategory";
    case ErrorKind::kDegeneratePrototypes: return "DegeneratePrototypes";
    case ErrorKind::kUnknownCategory: return "UnknownCategory";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kMissingMapper: return "MissingMapper";
    case ErrorKind::kEmptyGallery: return "EmptyGallery";
    case ErrorKind::kNoRelevantItems: return "NoRelevantItems";
    case ErrorKind::kInconsistentLabels: return "InconsistentLabels";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kRankDeficient: return "RankDeficient";
    case ErrorKind::kTooFewSamples: return "TooFewSamples";
    case ErrorKind::kWidthMismatch: return "WidthMismatch";
    case ErrorKind::kInfeasibleSeparation: return "InfeasibleSeparation";
    case ErrorKind::kMissingDomain: return "MissingDomain";
    case ErrorKind::kMissingModel: return "MissingModel";
    case ErrorKind::kUnknownMetric: return "UnknownMetric";
    case ErrorKind::kInsufficientSupport: return "InsufficientSupport";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
      kind_(kind) {}

}  // namespace oxds
