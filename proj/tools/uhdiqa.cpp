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

// uhdiqa command-line front end.
//
//   uhdiqa gen-synthetic --out-dir data --scenes 8
//   uhdiqa train --manifest data/manifest.csv --out-dir run --backbone tiny
//   uhdiqa evaluate --manifest data/manifest.csv --checkpoint run/checkpoint.uhdw --out-dir eval
//   uhdiqa score data/scene_0/pristine.png --checkpoint run/checkpoint.uhdw

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uhdiqa/datasets.hpp"
#include "uhdiqa/error.hpp"
#include "uhdiqa/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uhdiqa;

namespace {

// Flags that mirror keys of the flat run config; only flags given on the
// command line end up in `flat`.
struct Overrides {
  json flat = json::object();

  template <typename T>
  CLI::Option* option(CLI::App* app, const std::string& flag, const std::string& key,
                      const std::string& help) {
    return app->add_option_function<T>(flag, [this, key](const T& v) { flat[key] = v; }, help);
  }
  void flag(CLI::App* app, const std::string& flag, const std::string& key, bool value,
            const std::string& help) {
    app->add_flag_function(flag, [this, key, value](std::int64_t) { flat[key] = value; }, help);
  }
};

void AddPatchOptions(CLI::App* app, Overrides& o) {
  o.option<int>(app, "--sw", "sw", "Patch width in pixels (240)");
  o.option<int>(app, "--sh", "sh", "Patch height in pixels (240)");
  o.option<int>(app, "-n,--patches", "n", "Patches selected per image (3)");
  o.option<std::string>(app, "--measure", "measure",
                        "Texture measure: glcm, variance, local_variance, gray_diff_entropy, random");
  o.option<std::uint64_t>(app, "--measure-seed", "measure_seed", "Seed of the random measure");
  o.option<int>(app, "--glcm-dx", "glcm_dx", "GLCM horizontal offset (1)");
  o.option<int>(app, "--glcm-dy", "glcm_dy", "GLCM vertical offset (0)");
  o.option<int>(app, "--glcm-levels", "glcm_levels", "GLCM gray levels, 2..256");
  o.option<std::string>(app, "--glcm-normalize", "glcm_normalize", "image_area or valid_pairs");
  o.flag(app, "--glcm-all-directions", "glcm_all_directions", true, "Average contrast over four offsets");
  o.option<int>(app, "--block", "block", "Local variance block side (8)");
  o.option<double>(app, "--frame-interval", "frame_interval", "Seconds between sampled video frames (0.5)");
}

void AddModelOptions(CLI::App* app, Overrides& o) {
  o.option<std::string>(app, "--backbone", "backbone",
                        "Backbone family: tiny, small, resnet18, resnet50, resnext50, resnet101");
  o.option<int>(app, "--input-size", "input_size", "Backbone input side in pixels");
  o.option<std::string>(app, "--stage-mask", "stage_mask", "Fused stages as four bits, e.g. 0111");
  o.option<int>(app, "--hidden-dim", "hidden_dim", "Hidden units per head (128)");
  o.option<std::string>(app, "--weights", "weights", "Pretrained backbone archive")
      ->check(CLI::ExistingFile);
  o.option<std::uint64_t>(app, "--init-seed", "init_seed", "Seed for random backbone init");
  o.option<std::uint64_t>(app, "--head-seed", "head_seed", "Seed for head init");
}

void AddTrainOptions(CLI::App* app, Overrides& o) {
  o.option<double>(app, "--lr", "lr", "Initial learning rate (2e-4)");
  o.option<double>(app, "--lr-decay", "lr_decay", "Multiplicative decay (0.9)");
  o.option<int>(app, "--decay-period", "decay_period", "Epochs between decays (10)");
  o.option<int>(app, "--epochs", "epochs", "Training epochs (50)");
  o.option<int>(app, "--batch-size", "batch_size", "Images per batch (16)");
  o.option<std::string>(app, "--mode", "mode",
                        "multitask_uncertainty, multitask_fixed, classification_only, regression_only");
  o.option<double>(app, "--w-c", "w_c", "Classification weight in multitask_fixed mode");
  o.option<double>(app, "--w-q", "w_q", "Regression weight in multitask_fixed mode");
  o.option<std::uint64_t>(app, "--seed", "seed", "Training shuffle seed");
  o.flag(app, "--per-patch-loss", "per_patch_loss", true, "Apply losses per patch instead of per image");
  o.flag(app, "--freeze-backbone", "freeze_backbone", true, "Train the heads only");
  o.flag(app, "--raw-mos", "standardize_mos", false,
         "Regress raw MOS instead of standardized training MOS");
}

void AddEvalOptions(CLI::App* app, Overrides& o) {
  o.option<int>(app, "--trials", "trials", "Random scene splits (10)");
  o.option<double>(app, "--ratio", "ratio", "Training fraction of scenes (0.8)");
  o.option<double>(app, "--alpha", "alpha", "Significance level (0.05)");
  o.option<std::uint64_t>(app, "--split-seed", "split_seed", "Seed for scene splits");
}

struct Common {
  std::string config_path;
  std::string out_dir;
  bool quiet = false;
};

void AddCommon(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "Flat JSON run config")->check(CLI::ExistingFile);
  app->add_option("--out-dir", c.out_dir, "Output directory");
  app->add_flag("-q,--quiet", c.quiet, "Suppress progress messages");
}

Logger MakeLogger(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& msg) { std::cerr << "[uhdiqa] " << msg << '\n'; };
}

// defaults < config file < command line
RunConfig Resolve(RunConfig base, const Common& c, const Overrides& o) {
  if (!c.config_path.empty()) base = load_run_config(c.config_path, base);
  apply_flat_json(base, o.flat);
  if (!c.out_dir.empty()) base.out_dir = c.out_dir;
  validate(base);
  return base;
}

fs::path RequireOutDir(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw Error(ErrorKind::kValidation, "--out-dir is required");
  fs::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

void WriteJson(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<ManifestEntry> LoadManifest(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw Error(ErrorKind::kValidation, "--manifest is required");
  return load_manifest(cfg.manifest);
}

// Run config saved next to a checkpoint, so evaluation and scoring reuse the
// training-time patch settings.
RunConfig CheckpointBase(const fs::path& checkpoint, const Model& model) {
  RunConfig cfg = default_run_config();
  const fs::path sidecar = checkpoint.parent_path() / "run_config.json";
  if (fs::exists(sidecar)) cfg = load_run_config(sidecar, cfg);
  cfg.model = model.config();
  return cfg;
}

void CheckCompatible(const RunConfig& cfg, const Model& model) {
  const ModelConfig& m = model.config();
  const auto& a = cfg.model.backbone;
  const auto& b = m.backbone;
  if (a.stage_channels != b.stage_channels || a.input_size != b.input_size ||
      cfg.model.stage_mask != m.stage_mask || cfg.model.hidden_dim != m.hidden_dim) {
    throw Error(ErrorKind::kShape, "checkpoint was trained with backbone " + b.name + " widths " +
                                       json(b.stage_channels).dump() + ", input " +
                                       std::to_string(b.input_size) + ", mask " +
                                       StageMaskString(m.stage_mask) + ", hidden " +
                                       std::to_string(m.hidden_dim) + "; the config disagrees");
  }
}

RgbImage Preview(const RgbImage& img, const std::vector<PatchRef>& selected) {
  RgbImage out = img;
  // Dim everything, then restore the selected tiles and outline them.
  for (auto& v : out.pixels()) v = static_cast<std::uint8_t>(v / 3);
  for (const auto& r : selected) {
    for (int y = r.y0; y < r.y0 + r.sh; ++y) {
      for (int x = r.x0; x < r.x0 + r.sw; ++x) {
        const bool edge = x < r.x0 + 3 || y < r.y0 + 3 || x >= r.x0 + r.sw - 3 || y >= r.y0 + r.sh - 3;
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = edge ? (c == 0 ? 255 : 0) : img.at(x, y, c);
      }
    }
  }
  return out;
}

int CmdSelectPatches(const std::string& image_path, bool preview, const Common& c, const Overrides& o) {
  const RunConfig cfg = Resolve(default_run_config(), c, o);
  const RgbImage img = read_rgb(image_path);
  const GrayImage gray = to_gray(img);
  const auto scored = score_grid(gray, cfg.patch.sw, cfg.patch.sh, cfg.measure);
  const auto selected = rank_patches(scored, cfg.patch.n);
  std::vector<bool> flagged(scored.size(), false);
  for (const auto& r : selected) flagged[static_cast<std::size_t>(r.index)] = true;

  std::ostringstream csv;
  csv << "index,x0,y0,sw,sh,score,selected\n";
  for (const auto& r : scored) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", r.score);
    csv << r.index << ',' << r.x0 << ',' << r.y0 << ',' << r.sw << ',' << r.sh << ',' << buf << ','
        << (flagged[static_cast<std::size_t>(r.index)] ? 1 : 0) << '\n';
  }
  if (cfg.out_dir.empty()) {
    if (preview) throw Error(ErrorKind::kValidation, "--preview needs --out-dir");
    std::cout << csv.str();
    return 0;
  }
  const fs::path dir = RequireOutDir(cfg);
  std::ofstream(dir / "patches.csv", std::ios::trunc) << csv.str();
  if (preview) write_png(dir / "preview.png", Preview(img, selected));
  if (const Logger log = MakeLogger(c)) log(std::to_string(scored.size()) + " tiles scored, " + std::to_string(selected.size()) +
                " selected -> " + (dir / "patches.csv").string());
  return 0;
}

int CmdTrain(const Common& c, const Overrides& o) {
  const RunConfig cfg = Resolve(default_run_config(), c, o);
  const fs::path dir = RequireOutDir(cfg);
  const Logger log = MakeLogger(c);
  const auto entries = LoadManifest(cfg);
  const auto items = prepare_items(entries, cfg, log);
  TrainResult result;
  const auto model = train_model(items, cfg, &result, log);
  save_checkpoint(dir / "checkpoint.uhdw", *model, &result.optimizer);
  std::ofstream log_csv(dir / "train_log.csv", std::ios::trunc);
  write_train_log_csv(log_csv, result.log);
  json saved = to_flat_json(cfg);
  saved.erase("out_dir");
  WriteJson(dir / "run_config.json", saved);
  if (log) log("wrote " + (dir / "checkpoint.uhdw").string());
  return 0;
}

int CmdEvaluate(const std::string& checkpoint, bool retrain, const Common& c, const Overrides& o) {
  if (checkpoint.empty() && !retrain) {
    throw Error(ErrorKind::kValidation, "evaluate needs --checkpoint or --retrain");
  }
  const Logger log = MakeLogger(c);
  std::shared_ptr<Model> model;
  RunConfig base = default_run_config();
  if (!checkpoint.empty()) {
    model = std::make_shared<Model>(load_checkpoint(checkpoint));
    base = CheckpointBase(checkpoint, *model);
  }
  const RunConfig cfg = Resolve(base, c, o);
  if (model && !retrain) CheckCompatible(cfg, *model);
  const fs::path dir = RequireOutDir(cfg);
  const auto entries = LoadManifest(cfg);
  const auto splits = make_scene_splits(entries, cfg.eval.ratio, cfg.eval.trials, cfg.eval.seed);
  const auto items = prepare_items(entries, cfg, log);
  EvalReport report = run_evaluation(
      items, splits, retrain ? retraining_factory(cfg, log) : fixed_model_factory(model), log);
  report.alpha = cfg.eval.alpha;
  json j = to_json(report);
  j["mode"] = retrain ? "retrain" : "checkpoint";
  WriteJson(dir / "eval_report.json", j);
  if (log) {
    const auto a = aggregate(report, report_metrics()[0].get);
    log("SRCC " + (a ? std::to_string(a->mean) + " +/- " + std::to_string(a->std) : std::string("undefined")));
  }
  return 0;
}

int CmdAblate(const std::string& sweep, const Common& c, const Overrides& o) {
  const RunConfig cfg = Resolve(default_run_config(), c, o);
  const fs::path dir = RequireOutDir(cfg);
  const Sweep s = ParseSweep(sweep);
  const auto result = run_ablation(LoadManifest(cfg), cfg, s, MakeLogger(c));
  const std::string stem = "ablation_" + std::string(SweepName(s));
  std::ofstream csv(dir / (stem + ".csv"), std::ios::trunc);
  write_ablation_csv(csv, result);
  WriteJson(dir / (stem + ".json"), to_json(result));
  return 0;
}

int CmdScore(const std::string& media, const std::string& checkpoint, const Common& c, const Overrides& o) {
  const auto model = std::make_shared<Model>(load_checkpoint(checkpoint));
  const RunConfig cfg = Resolve(CheckpointBase(checkpoint, *model), c, o);
  CheckCompatible(cfg, *model);
  ManifestEntry entry;
  entry.media_path = media;
  entry.scene_id = "score";
  entry.media_kind = fs::is_directory(media) ? MediaKind::kFrameDir : MediaKind::kImage;
  const PreparedItem item = prepare_media(entry, cfg, MakeLogger(c));
  const ImagePrediction p = predict_item(*model, item);
  double q = p.q_score;
  if (model->mos_range) q = std::clamp(q, model->mos_range->first, model->mos_range->second);
  const json j = {{"y_pred", p.y_pred},
                  {"decision", DecisionName(decide_class(p))},
                  {"q_score", q},
                  {"patches_used", p.n_patches}};
  std::cout << j.dump(2) << '\n';
  if (!cfg.out_dir.empty()) WriteJson(RequireOutDir(cfg) / "score.json", j);
  return 0;
}

SyntheticVariant ParseVariant(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorKind::kValidation, "variant '" + text + "' must look like <factor>:<kernel>");
  }
  SyntheticVariant v;
  try {
    v.factor = std::stoi(text.substr(0, colon));
  } catch (const std::exception&) {
    throw Error(ErrorKind::kValidation, "bad factor in variant '" + text + "'");
  }
  v.kernel = ParseKernel(text.substr(colon + 1));
  return v;
}

int CmdGenSynthetic(SyntheticSpec spec, const std::vector<std::string>& kernels,
                    const std::vector<std::string>& variants, const Common& c) {
  if (c.out_dir.empty()) throw Error(ErrorKind::kValidation, "--out-dir is required");
  if (!kernels.empty()) {
    spec.kernels.clear();
    for (const auto& k : kernels) spec.kernels.push_back(ParseKernel(k));
  }
  for (const auto& v : variants) spec.variants.push_back(ParseVariant(v));
  const auto entries = generate_synthetic(spec, c.out_dir);
  if (const Logger log = MakeLogger(c)) log("wrote " + std::to_string(entries.size()) + " items to " +
                (fs::path(c.out_dir) / "manifest.csv").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind quality assessment and true/pseudo 4K detection"};
  app.require_subcommand(1);

  Common common;
  Overrides overrides;

  auto* select = app.add_subcommand("select-patches", "Score the patch grid of one image");
  std::string image_path;
  bool preview = false;
  select->add_option("image", image_path, "Input image")->required()->check(CLI::ExistingFile);
  select->add_flag("--preview", preview, "Also write preview.png with the selected tiles");
  AddCommon(select, common);
  AddPatchOptions(select, overrides);

  auto* train_cmd = app.add_subcommand("train", "Train on every item of a manifest");
  AddCommon(train_cmd, common);
  AddPatchOptions(train_cmd, overrides);
  AddModelOptions(train_cmd, overrides);
  AddTrainOptions(train_cmd, overrides);

  auto* evaluate = app.add_subcommand("evaluate", "Scene-disjoint evaluation over random splits");
  std::string checkpoint;
  bool retrain = false;
  evaluate->add_option("--checkpoint", checkpoint, "Trained checkpoint")->check(CLI::ExistingFile);
  evaluate->add_flag("--retrain", retrain, "Train a fresh model on each split's training side");
  AddCommon(evaluate, common);
  AddPatchOptions(evaluate, overrides);
  AddModelOptions(evaluate, overrides);
  AddTrainOptions(evaluate, overrides);
  AddEvalOptions(evaluate, overrides);

  auto* ablate = app.add_subcommand("ablate", "Paired comparison over a sweep of settings");
  std::string sweep;
  ablate->add_option("--sweep", sweep, "stage_masks, texture_measures, patch_grid or loss_modes")
      ->required();
  AddCommon(ablate, common);
  AddPatchOptions(ablate, overrides);
  AddModelOptions(ablate, overrides);
  AddTrainOptions(ablate, overrides);
  AddEvalOptions(ablate, overrides);

  for (auto* sub : {train_cmd, evaluate, ablate}) {
    overrides.option<std::string>(sub, "--manifest", "manifest", "Manifest CSV")
        ->check(CLI::ExistingFile);
  }

  auto* score = app.add_subcommand("score", "Score one image or frame directory");
  std::string media;
  std::string score_checkpoint;
  score->add_option("media", media, "Image file or frame directory")->required()->check(CLI::ExistingPath);
  score->add_option("--checkpoint", score_checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  AddCommon(score, common);
  AddPatchOptions(score, overrides);

  auto* gen = app.add_subcommand("gen-synthetic", "Render a synthetic true/pseudo 4K set");
  SyntheticSpec spec;
  std::vector<std::string> kernels;
  std::vector<std::string> variants;
  gen->add_option("--scenes", spec.scenes, "Number of scenes")->capture_default_str();
  gen->add_option("--width", spec.width, "Image width")->capture_default_str();
  gen->add_option("--height", spec.height, "Image height")->capture_default_str();
  gen->add_option("--factors", spec.downscale_factors, "Downscale factors")->delimiter(',');
  gen->add_option("--kernels", kernels, "Resampling kernels: nearest, bilinear, bicubic, lanczos")
      ->delimiter(',');
  gen->add_option("--variants", variants, "Explicit <factor>:<kernel> list, replaces factors x kernels")
      ->delimiter(',');
  gen->add_option("--seed", spec.seed, "Render seed")->capture_default_str();
  gen->add_option("--mos-lo", spec.mos_lo, "Lower end of the MOS range")->capture_default_str();
  gen->add_option("--mos-hi", spec.mos_hi, "Upper end of the MOS range")->capture_default_str();
  gen->add_option("--span", spec.span, "MOS drop as the factor grows")->capture_default_str();
  gen->add_option("--tile", spec.tile, "Grid of the guaranteed textured tiles")->capture_default_str();
  AddCommon(gen, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*select) return CmdSelectPatches(image_path, preview, common, overrides);
    if (*train_cmd) return CmdTrain(common, overrides);
    if (*evaluate) return CmdEvaluate(checkpoint, retrain, common, overrides);
    if (*ablate) return CmdAblate(sweep, common, overrides);
    if (*score) return CmdScore(media, score_checkpoint, common, overrides);
    if (*gen) return CmdGenSynthetic(spec, kernels, variants, common);
  } catch (const TrainingDivergedError& e) {
    std::cerr << "uhdiqa: " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const Error& e) {
    std::cerr << "uhdiqa: " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "uhdiqa: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
