// Copyright 2026 The uhdiqa Authors
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

#include "uhdiqa/error.hpp"

namespace uhdiqa {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kBounds: return "bounds error";
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kInsufficientPatches: return "insufficient patches";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kWeightsLoad: return "weights load error";
    case ErrorKind::kEmptyFusion: return "empty fusion";
    case ErrorKind::kEmptyInput: return "empty input";
    case ErrorKind::kUndefinedCorrelation: return "undefined correlation";
    case ErrorKind::kDegenerateTest: return "degenerate test";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kDuplicate: return "duplicate entry";
    case ErrorKind::kSplitImpossible: return "split impossible";
    case ErrorKind::kNoFrames: return "no frames";
    case ErrorKind::kTrainingDiverged: return "training diverged";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kTrainingDiverged:
    case ErrorKind::kIo:
    case ErrorKind::kWeightsLoad:
      return 3;
    default:
      return 2;
  }
}

}  // namespace uhdiqa
