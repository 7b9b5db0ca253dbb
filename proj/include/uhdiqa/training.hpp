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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uhdiqa/backbone.hpp"
#include "uhdiqa/heads.hpp"

namespace uhdiqa {

inline constexpr double kProbabilityClamp = 1e-7;

// s_i = log(sigma_i^2), so sigma_i^2 = exp(s_i) is positive for any real s_i.
struct UncertaintyParams {
  double s1 = 0.0;
  double s2 = 0.0;

  double sigma1_sq() const;
  double sigma2_sq() const;
};

struct LossBreakdown {
  double l_c = 0.0;
  double l_q = 0.0;
  double l_overall = 0.0;
  double sigma1_sq = 1.0;
  double sigma2_sq = 1.0;
};

// Binary cross entropy on the positive-class probability, clamped to
// [eps, 1 - eps].
double bce_loss(double y_pred, double y_label);
double bce_loss_derivative(double y_pred, double y_label);
double mse_loss(double q_score, double q_mos);

// exp(-s1)/2 * l_c + exp(-s2)/2 * l_q + s1/2 + s2/2.
LossBreakdown combined_loss(double l_c, double l_q, const UncertaintyParams& p);

struct CombinedLossGradient {
  double d_lc = 0.0;
  double d_lq = 0.0;
  double d_s1 = 0.0;
  double d_s2 = 0.0;
};
CombinedLossGradient combined_loss_gradient(double l_c, double l_q, const UncertaintyParams& p);

enum class TrainMode {
  kMultitaskUncertainty,
  kMultitaskFixed,
  kClassificationOnly,
  kRegressionOnly,
};

std::string_view TrainModeName(TrainMode mode);
TrainMode ParseTrainMode(std::string_view name);

struct TrainConfig {
  double lr = 2e-4;
  double lr_decay = 0.9;
  int decay_period = 10;
  int epochs = 50;
  int batch_size = 16;  // images, each contributing its selected patches
  TrainMode mode = TrainMode::kMultitaskUncertainty;
  double w_c = 0.5;  // kMultitaskFixed weights
  double w_q = 0.5;
  std::uint64_t seed = 0;
  bool per_patch_loss = false;  // broadcast labels to patches instead of pooling
  bool freeze_backbone = false;
  // Regress in standardized MOS units: q = mean + std * z over the
  // training MOS, fixed when a fresh model starts training.
  bool standardize_mos = true;
};

void validate(const TrainConfig& cfg);

// lr * lr_decay^floor(epoch / decay_period), epochs counted from 0.
double learning_rate_at(const TrainConfig& cfg, int epoch);

struct TrainSample {
  std::string id;
  std::vector<RgbImage> patches;
  int y_label = 0;  // 1 for true 4K
  double q_mos = 0.0;
};

struct ModelConfig {
  BackboneSpec backbone;
  StageMask stage_mask = kAllStages;
  int hidden_dim = 128;
  std::uint64_t head_seed = 0;
};

// Backbone, both heads and the two uncertainty parameters.
class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  Backbone& backbone() noexcept { return backbone_; }
  const Backbone& backbone() const noexcept { return backbone_; }
  MlpHead& classifier() noexcept { return classifier_; }
  const MlpHead& classifier() const noexcept { return classifier_; }
  MlpHead& regressor() noexcept { return regressor_; }
  const MlpHead& regressor() const noexcept { return regressor_; }

  UncertaintyParams uncertainty() const { return {s1_.value[0], s2_.value[0]}; }
  void set_uncertainty(const UncertaintyParams& p);
  double d_s1() const { return s1_.grad[0]; }
  double d_s2() const { return s2_.grad[0]; }

  QualityFeature feature(const RgbImage& patch) const;
  PatchPrediction predict_patch(const RgbImage& patch) const;
  ImagePrediction predict(std::span<const RgbImage> patches) const;

  // Archive-qualified names ("backbone/...", "heads/...", "uncertainty/...").
  std::vector<std::pair<std::string, Param*>> named_params();
  void zero_grad();

  struct ImageLosses {
    std::optional<double> l_c;
    std::optional<double> l_q;
  };
  // Forward-only losses for one image under the given pooling convention.
  ImageLosses losses(const TrainSample& sample, bool need_c, bool need_q,
                     bool per_patch) const;
  // Adds coef_c * dl_c/dtheta + coef_q * dl_q/dtheta to the gradients.
  ImageLosses accumulate_gradients(const TrainSample& sample, double coef_c,
                                   double coef_q, bool per_patch, bool freeze_backbone);

  // Raw regressor output to MOS units.
  double to_mos(double z) const { return mos_offset + mos_scale * z; }

  int epochs_trained = 0;
  double mos_offset = 0.0;
  double mos_scale = 1.0;
  std::optional<std::pair<double, double>> mos_range;

 private:
  ModelConfig cfg_;
  Backbone backbone_;
  MlpHead classifier_;
  MlpHead regressor_;
  Param s1_;
  Param s2_;
  // Reused between calls so activation buffers keep their capacity.
  std::vector<Backbone::Trace> trace_pool_;
};

struct AdamState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  std::int64_t step = 0;
};

class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<std::pair<std::string, Param*>>& params, double lr);

  AdamState state;

 private:
  double beta1_, beta2_, eps_;
};

struct EpochLog {
  int epoch = 0;
  std::optional<double> l_c;
  std::optional<double> l_q;
  double l_overall = 0.0;
  double sigma1_sq = 1.0;
  double sigma2_sq = 1.0;
  double lr = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  std::vector<EpochLog> log;
  AdamState optimizer;
};

// Objective value for a batch given its mean task losses.
double objective_value(const TrainConfig& cfg, std::optional<double> l_c,
                       std::optional<double> l_q, const UncertaintyParams& p);

TrainResult train(Model& model, std::span<const TrainSample> data, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

// epoch,l_c,l_q,l_overall,sigma1_sq,sigma2_sq,lr; inactive losses are "NA".
void write_train_log_csv(std::ostream& out, std::span<const EpochLog> log);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
  std::string worst_param;
};

// Compares analytic gradients of the objective on one sample against central
// differences. Parameters are sampled evenly across every block whose name
// starts with name_prefix.
GradientCheckResult finite_difference_check(Model& model, const TrainSample& sample,
                                            const TrainConfig& cfg, double step = 1e-4,
                                            int max_params = 128,
                                            const std::string& name_prefix = "");

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdamState* optimizer = nullptr);
Model load_checkpoint(const std::filesystem::path& path, AdamState* optimizer = nullptr);

}  // namespace uhdiqa
