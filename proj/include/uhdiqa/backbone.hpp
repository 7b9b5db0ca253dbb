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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "uhdiqa/archive.hpp"
#include "uhdiqa/imaging.hpp"
#include "uhdiqa/nn.hpp"

namespace uhdiqa {

using StageMask = std::array<bool, 4>;

inline constexpr StageMask kAllStages = {true, true, true, true};

std::string StageMaskString(const StageMask& mask);  // e.g. "1111"
StageMask ParseStageMask(const std::string& text);

struct PretrainedFile {
  std::filesystem::path path;
};
struct RandomInit {
  std::uint64_t seed = 0;
};
using WeightsSource = std::variant<PretrainedFile, RandomInit>;

// Five-stage extractor contract: stem (Stage 0) followed by four stages that
// each halve the spatial size. Stage i produces stage_channels[i] maps of side
// input_size / 2^(i+1).
struct BackboneSpec {
  std::string name = "tiny";
  std::array<int, 4> stage_channels = {4, 8, 16, 32};
  WeightsSource weights = RandomInit{0};
  int input_size = 240;
  // Per-channel input normalization applied to [0,1] RGB before the stem.
  std::array<double, 3> mean = {0.485, 0.456, 0.406};
  std::array<double, 3> stddev = {0.229, 0.224, 0.225};
};

void validate(const BackboneSpec& spec);

// Named stage-width families. "resnet18" carries the 64/128/256/512 widths;
// the deeper ResNet variants are declared for comparison tables only.
BackboneSpec backbone_family(const std::string& name);
std::vector<std::string> backbone_family_names();

int fused_dimension(const BackboneSpec& spec, const StageMask& mask);

struct StageFeatures {
  std::array<Tensor3, 4> maps;
};

struct QualityFeature {
  std::vector<double> vector;
  StageMask stage_mask = kAllStages;
};

std::vector<double> global_average_pool(const Tensor3& map);

QualityFeature fuse_features(const StageFeatures& sf, const StageMask& stage_mask);

class Backbone {
 public:
  // Layer activations kept for the backward pass.
  struct Trace {
    Tensor3 input;
    Conv2d::Cache stem_cache;
    Tensor3 stem_out;
    std::array<Conv2d::Cache, 4> conv1_cache;
    std::array<Tensor3, 4> conv1_out;
    std::array<Conv2d::Cache, 4> conv2_cache;
    std::array<Tensor3, 4> stage_out;
  };

  explicit Backbone(BackboneSpec spec);

  const BackboneSpec& spec() const noexcept { return spec_; }

  Tensor3 normalize(const RgbImage& patch) const;

  StageFeatures extract_stage_maps(const RgbImage& patch) const;
  StageFeatures forward(const Tensor3& input, Trace* trace) const;

  // Backpropagates dL/dF_i for each stage (empty tensors mean no gradient).
  void backward(const Trace& trace, const std::array<Tensor3, 4>& stage_grads);

  std::vector<Param*> params();
  std::vector<const Param*> params() const;

  // Maps "stage0".."stage4" to the parameter names that belong to it.
  nlohmann::json stage_manifest() const;

  void save_to(Archive& archive, const std::string& prefix = "backbone/") const;
  void load_from(const Archive& archive, const std::string& prefix = "backbone/");

 private:
  void check_patch(const RgbImage& patch) const;

  BackboneSpec spec_;
  Conv2d stem_;
  std::vector<Conv2d> conv1_;  // strided, one per stage
  std::vector<Conv2d> conv2_;
};

StageFeatures extract_stage_maps(const RgbImage& patch, const BackboneSpec& spec);

// Center-crops (or bilinearly enlarges) a patch to the square input side.
// Returns the patch unchanged when it already matches.
RgbImage fit_to_input(const RgbImage& patch, int input_size);

}  // namespace uhdiqa
