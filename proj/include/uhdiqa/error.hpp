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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uhdiqa {

// Every failure raised by the library carries one of these kinds. The CLI
// maps them onto exit codes (see ExitCodeFor).
enum class ErrorKind {
  kBounds,
  kDegenerateInput,
  kInsufficientPatches,
  kShape,
  kWeightsLoad,
  kEmptyFusion,
  kEmptyInput,
  kUndefinedCorrelation,
  kDegenerateTest,
  kParse,
  kValidation,
  kDuplicate,
  kSplitImpossible,
  kNoFrames,
  kTrainingDiverged,
  kIo,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what),
        kind_(kind),
        detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(int epoch, const std::string& what)
      : Error(ErrorKind::kTrainingDiverged,
              "epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// 2 for bad input/configuration, 3 for runtime and training failures.
int ExitCodeFor(ErrorKind kind);

}  // namespace uhdiqa
