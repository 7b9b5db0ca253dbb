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

#include "uhdiqa/heads.hpp"

#include <algorithm>
#include <cmath>

#include "uhdiqa/error.hpp"

namespace uhdiqa {

MlpHead::MlpHead(const std::string& name, HeadSpec spec)
    : spec_(spec),
      fc1_(name + ".fc1", spec.input_dim, spec.hidden_dim),
      fc2_(name + ".fc2", spec.hidden_dim, head_outputs(spec.task)) {
  if (spec.input_dim < 1 || spec.hidden_dim < 1) {
    throw Error(ErrorKind::kValidation, "head dimensions must be positive");
  }
}

std::vector<double> MlpHead::forward(std::span<const double> f, Cache* cache) const {
  if (static_cast<int>(f.size()) != spec_.input_dim) {
    throw Error(ErrorKind::kShape, "head expects a feature of length " +
                                       std::to_string(spec_.input_dim) + ", got " +
                                       std::to_string(f.size()));
  }
  auto hidden = fc1_.forward(f);
  relu_inplace(hidden);
  auto out = fc2_.forward(hidden);
  if (cache) {
    cache->input.assign(f.begin(), f.end());
    cache->hidden = std::move(hidden);
  }
  return out;
}

std::vector<double> MlpHead::backward(const Cache& cache, std::span<const double> dout) {
  auto dhidden = fc2_.backward(cache.hidden, dout);
  relu_backward_inplace(cache.hidden, dhidden);
  return fc1_.backward(cache.input, dhidden);
}

void MlpHead::init(std::mt19937_64& rng) {
  fc1_.init_he(rng);
  fc2_.init_uniform(rng);
}

std::array<double, 2> softmax2(double z_true, double z_pseudo) {
  const double m = std::max(z_true, z_pseudo);
  const double a = std::exp(z_true - m);
  const double b = std::exp(z_pseudo - m);
  const double s = a + b;
  return {a / s, b / s};
}

std::string_view DecisionName(Decision d) {
  return d == Decision::kTrue4k ? "true_4k" : "pseudo_4k";
}

std::array<double, 2> classify_patch(const QualityFeature& f, const MlpHead& head) {
  if (head.spec().task != HeadTask::kClassification) {
    throw Error(ErrorKind::kShape, "classify_patch needs a classification head");
  }
  const auto z = head.forward(f.vector);
  return softmax2(z[0], z[1]);
}

double regress_patch(const QualityFeature& f, const MlpHead& head) {
  if (head.spec().task != HeadTask::kRegression) {
    throw Error(ErrorKind::kShape, "regress_patch needs a regression head");
  }
  return head.forward(f.vector)[0];
}

ImagePrediction pool_image(std::span<const PatchPrediction> preds) {
  if (preds.empty()) throw Error(ErrorKind::kEmptyInput, "no patch predictions to pool");
  ImagePrediction out;
  double y_lo = preds[0].y, y_hi = preds[0].y, q_lo = preds[0].q, q_hi = preds[0].q;
  for (const auto& p : preds) {
    out.y_pred += p.y;
    out.q_score += p.q;
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
    q_lo = std::min(q_lo, p.q);
    q_hi = std::max(q_hi, p.q);
  }
  const double n = static_cast<double>(preds.size());
  // Rounding of the sum must not push the mean outside the sample range.
  out.y_pred = std::clamp(out.y_pred / n, y_lo, y_hi);
  out.q_score = std::clamp(out.q_score / n, q_lo, q_hi);
  out.n_patches = static_cast<int>(preds.size());
  return out;
}

Decision decide_class(const ImagePrediction& img, double threshold) {
  return img.y_pred >= threshold ? Decision::kTrue4k : Decision::kPseudo4k;
}

}  // namespace uhdiqa
