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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uhdiqa/archive.hpp"
#include "uhdiqa/backbone.hpp"
#include "uhdiqa/nn.hpp"

namespace uhdiqa {

enum class HeadTask { kClassification, kRegression };

struct HeadSpec {
  int input_dim = 960;
  int hidden_dim = 128;
  HeadTask task = HeadTask::kRegression;
};

inline int head_outputs(HeadTask task) { return task == HeadTask::kClassification ? 2 : 1; }

// Two fully connected layers with a rectified-linear hidden layer. The final
// layer is left unactivated; classification applies softmax on top.
class MlpHead {
 public:
  struct Cache {
    std::vector<double> input;
    std::vector<double> hidden;  // post-activation
  };

  MlpHead(const std::string& name, HeadSpec spec);

  const HeadSpec& spec() const noexcept { return spec_; }

  std::vector<double> forward(std::span<const double> f, Cache* cache = nullptr) const;
  // Accumulates parameter gradients; returns dL/df.
  std::vector<double> backward(const Cache& cache, std::span<const double> dout);

  void init(std::mt19937_64& rng);

  std::vector<Param*> params() { return {&fc1_.weight, &fc1_.bias, &fc2_.weight, &fc2_.bias}; }
  std::vector<const Param*> params() const {
    return {&fc1_.weight, &fc1_.bias, &fc2_.weight, &fc2_.bias};
  }

  Linear& fc1() noexcept { return fc1_; }
  Linear& fc2() noexcept { return fc2_; }

 private:
  HeadSpec spec_;
  Linear fc1_;
  Linear fc2_;
};

// Numerically stable two-way softmax; element 0 is the true-4K class.
std::array<double, 2> softmax2(double z_true, double z_pseudo);

struct PatchPrediction {
  double y = 0.0;  // probability of true 4K
  double q = 0.0;  // quality score on the training MOS scale
};

struct ImagePrediction {
  double y_pred = 0.0;
  double q_score = 0.0;
  int n_patches = 0;
};

enum class Decision { kTrue4k, kPseudo4k };

std::string_view DecisionName(Decision d);

std::array<double, 2> classify_patch(const QualityFeature& f, const MlpHead& head);
double regress_patch(const QualityFeature& f, const MlpHead& head);

// Arithmetic mean of the patch outputs.
ImagePrediction pool_image(std::span<const PatchPrediction> preds);

// true_4k iff y_pred >= threshold.
Decision decide_class(const ImagePrediction& img, double threshold = 0.5);

}  // namespace uhdiqa
