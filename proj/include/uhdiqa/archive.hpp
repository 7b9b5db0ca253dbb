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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uhdiqa {

// Weights/checkpoint container.
//
// Layout on disk:
//   8 bytes   magic "UHDIQA1\n"
//   8 bytes   little-endian uint64 header length L
//   L bytes   UTF-8 JSON header {"meta": {...}, "tensors": [{"name", "shape",
//             "offset", "count"}, ...]}; offsets count doubles from the start
//             of the payload
//   payload   IEEE-754 float64 values, little-endian, concatenated in header
//             order
//
// Tensor names are namespaced: "backbone/...", "heads/...", "uncertainty/...",
// "optimizer/m/...", "optimizer/v/...".
struct TensorRecord {
  std::vector<int> shape;
  std::vector<double> values;
};

struct Archive {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, TensorRecord> tensors;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

}  // namespace uhdiqa
