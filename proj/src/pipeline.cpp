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

#include "uhdiqa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "uhdiqa/error.hpp"

namespace uhdiqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void Log(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string_view NormalizationName(GlcmNormalization n) {
  return n == GlcmNormalization::kImageArea ? "image_area" : "valid_pairs";
}

GlcmNormalization ParseNormalization(const std::string& s) {
  if (s == "image_area") return GlcmNormalization::kImageArea;
  if (s == "valid_pairs") return GlcmNormalization::kValidPairs;
  throw Error(ErrorKind::kValidation, "unknown GLCM normalization '" + s + "'");
}

template <typename T>
T Get(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::kValidation, "config key '" + key + "' has the wrong type");
  }
}

std::optional<double> Opt(double v) { return std::isfinite(v) ? std::optional(v) : std::nullopt; }

json OptJson(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string FormatMetric(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

std::pair<double, double> MosRange(std::span<const PreparedItem> items) {
  double lo = items.front().entry.mos_lo, hi = items.front().entry.mos_hi;
  for (const auto& it : items) {
    lo = std::min(lo, it.entry.mos_lo);
    hi = std::max(hi, it.entry.mos_hi);
  }
  return {lo, hi};
}

// Items only depend on the patch, measure and backbone input settings.
std::string PreparationKey(const RunConfig& cfg) {
  json key = to_flat_json(cfg);
  json out;
  for (const char* k : {"sw", "sh", "n", "measure", "glcm_dx", "glcm_dy", "glcm_levels",
                        "glcm_normalize", "glcm_all_directions", "block", "diff_dx", "diff_dy",
                        "measure_seed", "input_size", "frame_interval"}) {
    out[k] = key[k];
  }
  return out.dump();
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.model.backbone = backbone_family("resnet18");
  return cfg;
}

void validate(const RunConfig& cfg) {
  if (cfg.patch.sw < 1 || cfg.patch.sh < 1) throw Error(ErrorKind::kValidation, "patch size must be positive");
  if (cfg.patch.n < 1) throw Error(ErrorKind::kValidation, "patch count must be >= 1");
  validate(cfg.measure.glcm);
  validate(cfg.model.backbone);
  validate(cfg.train);
  if (cfg.model.hidden_dim < 1) throw Error(ErrorKind::kValidation, "hidden_dim must be >= 1");
  if (std::none_of(cfg.model.stage_mask.begin(), cfg.model.stage_mask.end(), [](bool b) { return b; })) {
    throw Error(ErrorKind::kEmptyFusion, "stage mask enables no stage");
  }
  if (cfg.eval.trials < 1) throw Error(ErrorKind::kValidation, "trials must be >= 1");
  if (!(cfg.eval.ratio > 0.0 && cfg.eval.ratio < 1.0)) throw Error(ErrorKind::kValidation, "ratio must be in (0, 1)");
  if (!(cfg.eval.alpha > 0.0 && cfg.eval.alpha < 1.0)) throw Error(ErrorKind::kValidation, "alpha must be in (0, 1)");
  if (!(cfg.eval.frame_interval > 0.0)) throw Error(ErrorKind::kValidation, "frame_interval must be positive");
}

json to_flat_json(const RunConfig& cfg) {
  json j;
  j["sw"] = cfg.patch.sw;
  j["sh"] = cfg.patch.sh;
  j["n"] = cfg.patch.n;
  j["measure"] = TextureKindName(cfg.measure.kind);
  j["glcm_dx"] = cfg.measure.glcm.dx;
  j["glcm_dy"] = cfg.measure.glcm.dy;
  j["glcm_levels"] = cfg.measure.glcm.levels;
  j["glcm_normalize"] = NormalizationName(cfg.measure.glcm.normalize_by);
  j["glcm_all_directions"] = cfg.measure.all_directions;
  j["block"] = cfg.measure.block;
  j["diff_dx"] = cfg.measure.diff_dx;
  j["diff_dy"] = cfg.measure.diff_dy;
  j["measure_seed"] = cfg.measure.seed;
  const auto& bb = cfg.model.backbone;
  j["backbone"] = bb.name;
  j["stage_channels"] = bb.stage_channels;
  j["input_size"] = bb.input_size;
  j["stage_mask"] = StageMaskString(cfg.model.stage_mask);
  j["hidden_dim"] = cfg.model.hidden_dim;
  if (const auto* file = std::get_if<PretrainedFile>(&bb.weights)) {
    j["weights"] = file->path.string();
    j["init_seed"] = 0;
  } else {
    j["weights"] = "";
    j["init_seed"] = std::get<RandomInit>(bb.weights).seed;
  }
  j["head_seed"] = cfg.model.head_seed;
  const auto& t = cfg.train;
  j["lr"] = t.lr;
  j["lr_decay"] = t.lr_decay;
  j["decay_period"] = t.decay_period;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["mode"] = TrainModeName(t.mode);
  j["w_c"] = t.w_c;
  j["w_q"] = t.w_q;
  j["seed"] = t.seed;
  j["per_patch_loss"] = t.per_patch_loss;
  j["freeze_backbone"] = t.freeze_backbone;
  j["standardize_mos"] = t.standardize_mos;
  j["trials"] = cfg.eval.trials;
  j["ratio"] = cfg.eval.ratio;
  j["alpha"] = cfg.eval.alpha;
  j["split_seed"] = cfg.eval.seed;
  j["frame_interval"] = cfg.eval.frame_interval;
  j["manifest"] = cfg.manifest.string();
  j["out_dir"] = cfg.out_dir.string();
  return j;
}

void apply_flat_json(RunConfig& cfg, const json& flat) {
  if (!flat.is_object()) throw Error(ErrorKind::kValidation, "config must be a flat JSON object");
  // The family sets default widths, so it goes before any explicit override.
  if (flat.contains("backbone")) {
    BackboneSpec next = backbone_family(Get<std::string>(flat["backbone"], "backbone"));
    next.weights = cfg.model.backbone.weights;
    next.input_size = cfg.model.backbone.input_size;
    cfg.model.backbone = next;
  }
  std::optional<std::uint64_t> init_seed;
  for (const auto& [key, v] : flat.items()) {
    if (key == "sw") cfg.patch.sw = Get<int>(v, key);
    else if (key == "sh") cfg.patch.sh = Get<int>(v, key);
    else if (key == "n") cfg.patch.n = Get<int>(v, key);
    else if (key == "measure") cfg.measure.kind = ParseTextureKind(Get<std::string>(v, key));
    else if (key == "glcm_dx") cfg.measure.glcm.dx = Get<int>(v, key);
    else if (key == "glcm_dy") cfg.measure.glcm.dy = Get<int>(v, key);
    else if (key == "glcm_levels") cfg.measure.glcm.levels = Get<int>(v, key);
    else if (key == "glcm_normalize") cfg.measure.glcm.normalize_by = ParseNormalization(Get<std::string>(v, key));
    else if (key == "glcm_all_directions") cfg.measure.all_directions = Get<bool>(v, key);
    else if (key == "block") cfg.measure.block = Get<int>(v, key);
    else if (key == "diff_dx") cfg.measure.diff_dx = Get<int>(v, key);
    else if (key == "diff_dy") cfg.measure.diff_dy = Get<int>(v, key);
    else if (key == "measure_seed") cfg.measure.seed = Get<std::uint64_t>(v, key);
    else if (key == "backbone") continue;
    else if (key == "stage_channels") cfg.model.backbone.stage_channels = Get<std::array<int, 4>>(v, key);
    else if (key == "input_size") cfg.model.backbone.input_size = Get<int>(v, key);
    else if (key == "stage_mask") cfg.model.stage_mask = ParseStageMask(Get<std::string>(v, key));
    else if (key == "hidden_dim") cfg.model.hidden_dim = Get<int>(v, key);
    else if (key == "weights") {
      const auto path = Get<std::string>(v, key);
      if (path.empty()) {
        cfg.model.backbone.weights = RandomInit{};
      } else {
        cfg.model.backbone.weights = PretrainedFile{path};
        cfg.weights = path;
      }
    } else if (key == "init_seed") init_seed = Get<std::uint64_t>(v, key);
    else if (key == "head_seed") cfg.model.head_seed = Get<std::uint64_t>(v, key);
    else if (key == "lr") cfg.train.lr = Get<double>(v, key);
    else if (key == "lr_decay") cfg.train.lr_decay = Get<double>(v, key);
    else if (key == "decay_period") cfg.train.decay_period = Get<int>(v, key);
    else if (key == "epochs") cfg.train.epochs = Get<int>(v, key);
    else if (key == "batch_size") cfg.train.batch_size = Get<int>(v, key);
    else if (key == "mode") cfg.train.mode = ParseTrainMode(Get<std::string>(v, key));
    else if (key == "w_c") cfg.train.w_c = Get<double>(v, key);
    else if (key == "w_q") cfg.train.w_q = Get<double>(v, key);
    else if (key == "seed") cfg.train.seed = Get<std::uint64_t>(v, key);
    else if (key == "per_patch_loss") cfg.train.per_patch_loss = Get<bool>(v, key);
    else if (key == "freeze_backbone") cfg.train.freeze_backbone = Get<bool>(v, key);
    else if (key == "standardize_mos") cfg.train.standardize_mos = Get<bool>(v, key);
    else if (key == "trials") cfg.eval.trials = Get<int>(v, key);
    else if (key == "ratio") cfg.eval.ratio = Get<double>(v, key);
    else if (key == "alpha") cfg.eval.alpha = Get<double>(v, key);
    else if (key == "split_seed") cfg.eval.seed = Get<std::uint64_t>(v, key);
    else if (key == "frame_interval") cfg.eval.frame_interval = Get<double>(v, key);
    else if (key == "manifest") cfg.manifest = Get<std::string>(v, key);
    else if (key == "out_dir") cfg.out_dir = Get<std::string>(v, key);
    else throw Error(ErrorKind::kValidation, "unknown config key '" + key + "'");
  }
  if (init_seed) {
    if (auto* r = std::get_if<RandomInit>(&cfg.model.backbone.weights)) r->seed = *init_seed;
  }
}

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path.string());
  json flat;
  try {
    flat = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, "config " + path.string() + ": " + e.what());
  }
  apply_flat_json(base, flat);
  return base;
}

std::vector<RgbImage> extract_patches(const RgbImage& img, const PatchConfig& patch,
                                      const TextureMeasure& measure, int input_size,
                                      const Logger& log, std::vector<PatchRef>* refs) {
  const auto selected = select_patches(to_gray(img), patch.sw, patch.sh, patch.n, measure);
  if (patch.sw != input_size || patch.sh != input_size) {
    Log(log, "fitting " + std::to_string(patch.sw) + "x" + std::to_string(patch.sh) +
                 " patches to the " + std::to_string(input_size) + "px backbone input");
  }
  std::vector<RgbImage> out;
  out.reserve(selected.size());
  for (const auto& r : selected) {
    out.push_back(fit_to_input(crop(img, r.x0, r.y0, r.sw, r.sh), input_size));
  }
  if (refs) *refs = selected;
  return out;
}

PreparedItem prepare_media(const ManifestEntry& entry, const RunConfig& cfg, const Logger& log) {
  PreparedItem item{entry, {}};
  const int input = cfg.model.backbone.input_size;
  if (entry.media_kind == MediaKind::kImage) {
    item.frames.push_back(extract_patches(read_rgb(entry.media_path), cfg.patch, cfg.measure, input, log));
  } else {
    for (const auto& frame : sample_frames(entry.media_path, cfg.eval.frame_interval)) {
      item.frames.push_back(extract_patches(read_rgb(frame), cfg.patch, cfg.measure, input, log));
    }
  }
  return item;
}

std::vector<PreparedItem> prepare_items(const std::vector<ManifestEntry>& entries, const RunConfig& cfg,
                                        const Logger& log) {
  std::vector<PreparedItem> items;
  items.reserve(entries.size());
  bool logged_fit = false;
  const Logger once = [&](const std::string& msg) {
    if (!logged_fit) Log(log, msg);
    logged_fit = true;
  };
  for (const auto& e : entries) items.push_back(prepare_media(e, cfg, once));
  return items;
}

TrainSample to_train_sample(const PreparedItem& item) {
  TrainSample s;
  s.id = item.entry.media_path.string();
  for (const auto& frame : item.frames) s.patches.insert(s.patches.end(), frame.begin(), frame.end());
  s.y_label = item.entry.label == Label::kTrue4k ? 1 : item.entry.label == Label::kPseudo4k ? 0 : -1;
  s.q_mos = item.entry.mos;
  return s;
}

std::vector<TrainSample> to_train_samples(std::span<const PreparedItem> items) {
  std::vector<TrainSample> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(to_train_sample(it));
  return out;
}

ImagePrediction predict_item(const Model& model, const PreparedItem& item) {
  if (item.frames.empty()) throw Error(ErrorKind::kEmptyInput, "item has no frames");
  ImagePrediction video{0.0, 0.0, 0};
  for (const auto& frame : item.frames) {
    const ImagePrediction p = model.predict(frame);
    video.y_pred += p.y_pred;
    video.q_score += p.q_score;
    video.n_patches += p.n_patches;
  }
  const double n = static_cast<double>(item.frames.size());
  video.y_pred /= n;
  video.q_score /= n;
  return video;
}

ImagePrediction ModelPredictor::predict(const PreparedItem& item) const {
  return predict_item(*model_, item);
}

ImagePrediction OraclePredictor::predict(const PreparedItem& item) const {
  bool positive = item.entry.label == Label::kTrue4k;
  if (invert_) positive = !positive;
  int patches = 0;
  for (const auto& f : item.frames) patches += static_cast<int>(f.size());
  return {positive ? 1.0 : 0.0, item.entry.mos, patches};
}

SplitMetrics evaluate_split(const Predictor& predictor, std::span<const PreparedItem> test,
                            const SplitSpec& split) {
  SplitMetrics m;
  m.trial_index = split.trial_index;
  m.fingerprint = split.fingerprint();
  m.n_test = static_cast<int>(test.size());
  std::vector<double> q, mos;
  std::vector<Decision> decisions, labels;
  for (const auto& item : test) {
    const ImagePrediction p = predictor.predict(item);
    q.push_back(p.q_score);
    mos.push_back(item.entry.mos);
    if (item.entry.label != Label::kUnlabeled) {
      decisions.push_back(decide_class(p));
      labels.push_back(item.entry.label == Label::kTrue4k ? Decision::kTrue4k : Decision::kPseudo4k);
    }
  }
  const auto attempt = [](auto&& fn) -> std::optional<double> {
    try {
      return Opt(fn());
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  if (q.size() >= 2) {
    m.srcc = attempt([&] { return srcc(q, mos); });
    m.krcc = attempt([&] { return krcc(q, mos); });
    try {
      const MappedAgreement agreement = plcc_rmse_after_mapping(q, mos);
      m.plcc = Opt(agreement.plcc);
      m.rmse = Opt(agreement.rmse);
      const auto mapped = apply_logistic(agreement.mapping, q);
      for (std::size_t i = 0; i < mapped.size(); ++i) m.residuals.push_back(mapped[i] - mos[i]);
    } catch (const Error&) {
    }
  }
  if (!labels.empty()) m.classification = classification_report(decisions, labels);
  return m;
}

EvalReport run_evaluation(std::span<const PreparedItem> items, const std::vector<SplitSpec>& splits,
                          const PredictorFactory& factory, const Logger& log) {
  EvalReport report;
  for (const auto& split : splits) {
    std::vector<PreparedItem> train_side, test_side;
    const std::set<std::string> test_scenes(split.test_scenes.begin(), split.test_scenes.end());
    for (const auto& it : items) {
      (test_scenes.count(it.entry.scene_id) ? test_side : train_side).push_back(it);
    }
    Log(log, "split " + std::to_string(split.trial_index) + " [" + split.fingerprint() + "]: " +
                 std::to_string(train_side.size()) + " train / " + std::to_string(test_side.size()) +
                 " test items");
    const auto predictor = factory(split, train_side);
    report.splits.push_back(evaluate_split(*predictor, test_side, split));
  }
  return report;
}

std::shared_ptr<Model> train_model(std::span<const PreparedItem> items, const RunConfig& cfg,
                                   TrainResult* result, const Logger& log) {
  if (items.empty()) throw Error(ErrorKind::kEmptyInput, "no training items");
  auto model = std::make_shared<Model>(cfg.model);
  const auto samples = to_train_samples(items);
  TrainResult r = train(*model, samples, cfg.train, [&](const EpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %d: l_overall=%.6g sigma1_sq=%.4g sigma2_sq=%.4g lr=%.3g",
                  e.epoch, e.l_overall, e.sigma1_sq, e.sigma2_sq, e.lr);
    Log(log, buf);
  });
  model->mos_range = MosRange(items);
  if (result) *result = std::move(r);
  return model;
}

PredictorFactory retraining_factory(const RunConfig& cfg, const Logger& log) {
  return [cfg, log](const SplitSpec&, std::span<const PreparedItem> train_side) -> std::unique_ptr<Predictor> {
    return std::make_unique<ModelPredictor>(train_model(train_side, cfg, nullptr, log));
  };
}

PredictorFactory fixed_model_factory(std::shared_ptr<const Model> model) {
  return [model](const SplitSpec&, std::span<const PreparedItem>) -> std::unique_ptr<Predictor> {
    return std::make_unique<ModelPredictor>(model);
  };
}

std::optional<Aggregate> aggregate(const EvalReport& report,
                                   const std::function<std::optional<double>(const SplitMetrics&)>& get) {
  std::vector<double> values;
  for (const auto& s : report.splits) {
    if (const auto v = get(s)) values.push_back(*v);
  }
  if (values.empty()) return std::nullopt;
  Aggregate a;
  a.count = static_cast<int>(values.size());
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / a.count;
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / a.count);
  return a;
}

const std::vector<MetricAccessor>& report_metrics() {
  using C = ClassificationReport;
  const auto cls = [](double C::*field) {
    return [field](const SplitMetrics& s) -> std::optional<double> {
      if (!s.classification) return std::nullopt;
      return (*s.classification).*field;
    };
  };
  static const std::vector<MetricAccessor> metrics = {
      {"srcc", [](const SplitMetrics& s) { return s.srcc; }},
      {"krcc", [](const SplitMetrics& s) { return s.krcc; }},
      {"plcc", [](const SplitMetrics& s) { return s.plcc; }},
      {"rmse", [](const SplitMetrics& s) { return s.rmse; }},
      {"p_t", cls(&C::p_t)},
      {"p_f", cls(&C::p_f)},
      {"r_t", cls(&C::r_t)},
      {"r_f", cls(&C::r_f)},
      {"accuracy", cls(&C::accuracy)},
  };
  return metrics;
}

json to_json(const EvalReport& report) {
  json j;
  j["schema"] = kEvalReportSchema;
  j["significance_test"] = "plain two-sided variance-ratio F test on mapped residuals";
  j["alpha"] = report.alpha;
  j["n_splits"] = report.splits.size();
  j["splits"] = json::array();
  for (const auto& s : report.splits) {
    json row;
    row["trial"] = s.trial_index;
    row["fingerprint"] = s.fingerprint;
    row["n_test"] = s.n_test;
    for (const auto& m : report_metrics()) row[m.name] = OptJson(m.get(s));
    if (s.classification) {
      const auto& c = *s.classification;
      row["confusion"] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
      row["undefined"] = {{"p_t", c.p_t_undefined},
                          {"p_f", c.p_f_undefined},
                          {"r_t", c.r_t_undefined},
                          {"r_f", c.r_f_undefined}};
    } else {
      row["confusion"] = nullptr;
      row["undefined"] = nullptr;
    }
    j["splits"].push_back(row);
  }
  json summary = json::object();
  for (const auto& m : report_metrics()) {
    const auto a = aggregate(report, m.get);
    summary[m.name] = a ? json{{"mean", a->mean}, {"std", a->std}, {"count", a->count}} : json(nullptr);
  }
  j["summary"] = summary;
  return j;
}

std::string_view SweepName(Sweep s) {
  switch (s) {
    case Sweep::kStageMasks: return "stage_masks";
    case Sweep::kTextureMeasures: return "texture_measures";
    case Sweep::kPatchGrid: return "patch_grid";
    case Sweep::kLossModes: return "loss_modes";
  }
  return "stage_masks";
}

Sweep ParseSweep(std::string_view name) {
  for (Sweep s : {Sweep::kStageMasks, Sweep::kTextureMeasures, Sweep::kPatchGrid, Sweep::kLossModes}) {
    if (SweepName(s) == name) return s;
  }
  throw Error(ErrorKind::kValidation, "unknown sweep '" + std::string(name) + "'");
}

std::vector<AblationPoint> ablation_points(Sweep sweep, const RunConfig& base) {
  std::vector<AblationPoint> points;
  switch (sweep) {
    case Sweep::kStageMasks:
      for (const auto& [name, mask] : std::vector<std::pair<std::string, std::string>>{
               {"BL", "0001"}, {"BL_234", "0111"}, {"BL_134", "1011"}, {"BL_124", "1101"}, {"BL_all", "1111"}}) {
        RunConfig cfg = base;
        cfg.model.stage_mask = ParseStageMask(mask);
        points.push_back({name, cfg});
      }
      break;
    case Sweep::kTextureMeasures:
      for (TextureKind kind : {TextureKind::kGlcmContrast, TextureKind::kVariance, TextureKind::kLocalVariance,
                               TextureKind::kGrayDiffEntropy, TextureKind::kRandom}) {
        RunConfig cfg = base;
        cfg.measure.kind = kind;
        points.push_back({std::string(TextureKindName(kind)), cfg});
      }
      break;
    case Sweep::kPatchGrid:
      for (int n : {3, 5, 7}) {
        for (int size : {120, 240, 480}) {
          RunConfig cfg = base;
          cfg.patch = {size, size, n};
          cfg.model.backbone.input_size = size;
          points.push_back({"N" + std::to_string(n) + "_" + std::to_string(size), cfg});
        }
      }
      break;
    case Sweep::kLossModes:
      for (TrainMode mode : {TrainMode::kMultitaskUncertainty, TrainMode::kMultitaskFixed,
                             TrainMode::kClassificationOnly, TrainMode::kRegressionOnly}) {
        RunConfig cfg = base;
        cfg.train.mode = mode;
        points.push_back({std::string(TrainModeName(mode)), cfg});
      }
      break;
  }
  return points;
}

AblationResult run_ablation(const std::vector<ManifestEntry>& entries, const RunConfig& base, Sweep sweep,
                            const Logger& log) {
  const auto splits = make_scene_splits(entries, base.eval.ratio, base.eval.trials, base.eval.seed);
  AblationResult result;
  result.sweep = sweep;
  std::map<std::string, std::vector<PreparedItem>> cache;
  for (const auto& point : ablation_points(sweep, base)) {
    validate(point.cfg);
    Log(log, "ablation row " + point.name);
    const std::string key = PreparationKey(point.cfg);
    auto it = cache.find(key);
    if (it == cache.end()) {
      cache.clear();
      it = cache.emplace(key, prepare_items(entries, point.cfg, log)).first;
    }
    EvalReport report = run_evaluation(it->second, splits, retraining_factory(point.cfg, log), log);
    report.alpha = base.eval.alpha;
    json settings = to_flat_json(point.cfg);
    settings.erase("manifest");
    settings.erase("out_dir");
    result.rows.push_back({point.name, std::move(settings), std::move(report)});
  }
  return result;
}

void write_ablation_csv(std::ostream& out, const AblationResult& result) {
  out << "row";
  for (const auto& m : report_metrics()) out << ',' << m.name << "_mean," << m.name << "_std";
  out << ",splits,fingerprints\n";
  for (const auto& row : result.rows) {
    out << row.name;
    for (const auto& m : report_metrics()) {
      const auto a = aggregate(row.report, m.get);
      out << ',' << FormatMetric(a ? std::optional(a->mean) : std::nullopt) << ','
          << FormatMetric(a ? std::optional(a->std) : std::nullopt);
    }
    out << ',' << row.report.splits.size() << ',';
    for (std::size_t i = 0; i < row.report.splits.size(); ++i) {
      out << (i ? ";" : "") << row.report.splits[i].fingerprint;
    }
    out << '\n';
  }
}

json to_json(const AblationResult& result) {
  json j;
  j["schema"] = "uhdiqa.ablation.v1";
  j["sweep"] = SweepName(result.sweep);
  j["rows"] = json::array();
  std::vector<double> reference;
  for (std::size_t r = 0; r < result.rows.size(); ++r) {
    const auto& row = result.rows[r];
    std::vector<double> residuals;
    for (const auto& s : row.report.splits) residuals.insert(residuals.end(), s.residuals.begin(), s.residuals.end());
    json entry;
    entry["name"] = row.name;
    entry["settings"] = row.settings;
    entry["report"] = to_json(row.report);
    // Residual variance against the first row, pooled over all splits.
    entry["f_test_vs_first"] = nullptr;
    if (r == 0) {
      reference = residuals;
    } else {
      try {
        const FTestResult f = residual_f_test(residuals, reference, row.report.alpha);
        entry["f_test_vs_first"] = {{"verdict", FTestVerdictName(f.verdict)},
                                    {"ratio", f.ratio},
                                    {"lower_quantile", f.lower_quantile},
                                    {"upper_quantile", f.upper_quantile}};
      } catch (const Error&) {
      }
    }
    j["rows"].push_back(entry);
  }
  return j;
}

}  // namespace uhdiqa
