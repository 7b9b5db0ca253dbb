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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uhdiqa/datasets.hpp"
#include "uhdiqa/metrics.hpp"
#include "uhdiqa/texture.hpp"
#include "uhdiqa/training.hpp"

namespace uhdiqa {

using Logger = std::function<void(const std::string&)>;

struct PatchConfig {
  int sw = 240;
  int sh = 240;
  int n = 3;
};

struct EvalConfig {
  int trials = 10;
  double ratio = 0.8;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  double frame_interval = 0.5;  // seconds between sampled video frames
};

struct RunConfig {
  PatchConfig patch;
  TextureMeasure measure;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  std::filesystem::path manifest;
  std::filesystem::path weights;
  std::filesystem::path out_dir;
};

// Library defaults: resnet18-width backbone, random init unless weights is set.
RunConfig default_run_config();

void validate(const RunConfig& cfg);

// Flat key/value view. Keys: sw, sh, n, measure, measure_seed, glcm_dx,
// glcm_dy, glcm_levels, glcm_normalize, glcm_all_directions, block, diff_dx,
// diff_dy, backbone, stage_channels, input_size, stage_mask, hidden_dim,
// weights, init_seed, head_seed, lr, lr_decay, decay_period, epochs,
// batch_size, mode, w_c, w_q, seed, per_patch_loss, freeze_backbone,
// standardize_mos, trials, ratio, alpha, split_seed, frame_interval,
// manifest, out_dir.
nlohmann::json to_flat_json(const RunConfig& cfg);
// Overrides fields named in `flat`; unknown keys are a validation error.
void apply_flat_json(RunConfig& cfg, const nlohmann::json& flat);
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base);

// Top-n texture-ranked RGB patches of one image, fitted to the backbone input.
std::vector<RgbImage> extract_patches(const RgbImage& img, const PatchConfig& patch,
                                      const TextureMeasure& measure, int input_size,
                                      const Logger& log = {},
                                      std::vector<PatchRef>* refs = nullptr);

// One manifest item with patches per sampled frame (a still image has one).
struct PreparedItem {
  ManifestEntry entry;
  std::vector<std::vector<RgbImage>> frames;
};

PreparedItem prepare_media(const ManifestEntry& entry, const RunConfig& cfg,
                           const Logger& log = {});
std::vector<PreparedItem> prepare_items(const std::vector<ManifestEntry>& entries,
                                        const RunConfig& cfg, const Logger& log = {});

// Patches of all frames flattened; pooled loss equals the mean over frames.
TrainSample to_train_sample(const PreparedItem& item);
std::vector<TrainSample> to_train_samples(std::span<const PreparedItem> items);

// Per-frame pooling, then the temporal mean over frames.
ImagePrediction predict_item(const Model& model, const PreparedItem& item);

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual ImagePrediction predict(const PreparedItem& item) const = 0;
};

class ModelPredictor : public Predictor {
 public:
  explicit ModelPredictor(std::shared_ptr<const Model> model) : model_(std::move(model)) {}
  ImagePrediction predict(const PreparedItem& item) const override;

 private:
  std::shared_ptr<const Model> model_;
};

// Returns the stored MOS and label; an upper bound for the protocol.
class OraclePredictor : public Predictor {
 public:
  explicit OraclePredictor(bool invert_labels = false) : invert_(invert_labels) {}
  ImagePrediction predict(const PreparedItem& item) const override;

 private:
  bool invert_;
};

// Undefined metrics (too few items, constant inputs) are left empty.
struct SplitMetrics {
  int trial_index = 0;
  std::string fingerprint;
  int n_test = 0;
  std::optional<double> srcc, krcc, plcc, rmse;
  std::optional<ClassificationReport> classification;
  std::vector<double> residuals;  // mapped prediction minus MOS
};

SplitMetrics evaluate_split(const Predictor& predictor, std::span<const PreparedItem> test,
                            const SplitSpec& split);

struct EvalReport {
  std::vector<SplitMetrics> splits;
  double alpha = 0.05;
};

// Builds the predictor for one split from its training side.
using PredictorFactory = std::function<std::unique_ptr<Predictor>(
    const SplitSpec& split, std::span<const PreparedItem> train_side)>;

EvalReport run_evaluation(std::span<const PreparedItem> items, const std::vector<SplitSpec>& splits,
                          const PredictorFactory& factory, const Logger& log = {});

// Trains a fresh model from cfg on the given items.
std::shared_ptr<Model> train_model(std::span<const PreparedItem> items, const RunConfig& cfg,
                                   TrainResult* result = nullptr, const Logger& log = {});

// Factory that retrains per split, or reuses a fixed model when given one.
PredictorFactory retraining_factory(const RunConfig& cfg, const Logger& log = {});
PredictorFactory fixed_model_factory(std::shared_ptr<const Model> model);

inline constexpr const char* kEvalReportSchema = "uhdiqa.eval_report.v1";

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population
  int count = 0;     // splits where the metric was defined
};

std::optional<Aggregate> aggregate(const EvalReport& report,
                                   const std::function<std::optional<double>(const SplitMetrics&)>& get);

// Metric names in report order, with an accessor each.
struct MetricAccessor {
  const char* name;
  std::function<std::optional<double>(const SplitMetrics&)> get;
};
const std::vector<MetricAccessor>& report_metrics();

nlohmann::json to_json(const EvalReport& report);

enum class Sweep { kStageMasks, kTextureMeasures, kPatchGrid, kLossModes };

std::string_view SweepName(Sweep s);
Sweep ParseSweep(std::string_view name);

struct AblationPoint {
  std::string name;
  RunConfig cfg;
};

std::vector<AblationPoint> ablation_points(Sweep sweep, const RunConfig& base);

struct AblationRow {
  std::string name;
  nlohmann::json settings;
  EvalReport report;
};

struct AblationResult {
  Sweep sweep = Sweep::kStageMasks;
  std::vector<AblationRow> rows;
};

// Every row is evaluated on the same scene splits.
AblationResult run_ablation(const std::vector<ManifestEntry>& entries, const RunConfig& base,
                            Sweep sweep, const Logger& log = {});

void write_ablation_csv(std::ostream& out, const AblationResult& result);
nlohmann::json to_json(const AblationResult& result);

}  // namespace uhdiqa
