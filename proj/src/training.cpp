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

#include "uhdiqa/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "uhdiqa/error.hpp"

namespace uhdiqa {

namespace {

struct Coefficients {
  double c = 0.0;
  double q = 0.0;
  bool need_c = false;
  bool need_q = false;
};

Coefficients CoefficientsFor(const TrainConfig& cfg, const UncertaintyParams& p) {
  switch (cfg.mode) {
    case TrainMode::kMultitaskUncertainty:
      return {std::exp(-p.s1) / 2.0, std::exp(-p.s2) / 2.0, true, true};
    case TrainMode::kMultitaskFixed:
      return {cfg.w_c, cfg.w_q, true, true};
    case TrainMode::kClassificationOnly:
      return {1.0, 0.0, true, false};
    case TrainMode::kRegressionOnly:
      return {0.0, 1.0, false, true};
  }
  return {};
}

constexpr std::size_t kTraceBudgetBytes = std::size_t{256} << 20;

// Approximate size of one Backbone::Trace: im2col buffers plus activations.
std::size_t TraceBytes(const BackboneSpec& spec) {
  std::size_t side = static_cast<std::size_t>(spec.input_size);
  std::size_t doubles = 27 * side * side + 4 * side * side;
  std::size_t in = static_cast<std::size_t>(spec.stage_channels[0]);
  doubles += in * side * side;
  for (int i = 0; i < 4; ++i) {
    side = (side + 1) / 2;
    const std::size_t c = static_cast<std::size_t>(spec.stage_channels[i]);
    doubles += (in * 9 + c * 9) * side * side + 3 * c * side * side;
    in = c;
  }
  return doubles * sizeof(double);
}

std::vector<double> ZerosLike(const std::vector<double>& v) { return std::vector<double>(v.size(), 0.0); }

// Gradient of a GAP'ed, fused feature w.r.t. each enabled stage map.
std::array<Tensor3, 4> SplitFeatureGradient(const StageFeatures& sf, const StageMask& mask,
                                            std::span<const double> df) {
  std::array<Tensor3, 4> grads;
  std::size_t offset = 0;
  for (int i = 0; i < 4; ++i) {
    if (!mask[i]) continue;
    const Tensor3& map = sf.maps[i];
    Tensor3 g(map.channels, map.height, map.width);
    const double inv = 1.0 / static_cast<double>(map.plane());
    for (int c = 0; c < map.channels; ++c) {
      const double v = df[offset + c] * inv;
      std::fill_n(g.data.begin() + static_cast<std::ptrdiff_t>(c * map.plane()), map.plane(), v);
    }
    offset += static_cast<std::size_t>(map.channels);
    grads[i] = std::move(g);
  }
  return grads;
}

void CheckSample(const TrainSample& s) {
  if (s.patches.empty()) {
    throw Error(ErrorKind::kEmptyInput, "training sample '" + s.id + "' has no patches");
  }
}

}  // namespace

double UncertaintyParams::sigma1_sq() const { return std::exp(s1); }
double UncertaintyParams::sigma2_sq() const { return std::exp(s2); }

double bce_loss(double y_pred, double y_label) {
  const double y = std::clamp(y_pred, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -(y_label * std::log(y) + (1.0 - y_label) * std::log(1.0 - y));
}

double bce_loss_derivative(double y_pred, double y_label) {
  if (y_pred < kProbabilityClamp || y_pred > 1.0 - kProbabilityClamp) return 0.0;
  return -y_label / y_pred + (1.0 - y_label) / (1.0 - y_pred);
}

double mse_loss(double q_score, double q_mos) {
  const double d = q_score - q_mos;
  return d * d;
}

LossBreakdown combined_loss(double l_c, double l_q, const UncertaintyParams& p) {
  LossBreakdown out;
  out.l_c = l_c;
  out.l_q = l_q;
  out.l_overall = std::exp(-p.s1) / 2.0 * l_c + std::exp(-p.s2) / 2.0 * l_q + p.s1 / 2.0 +
                  p.s2 / 2.0;
  out.sigma1_sq = p.sigma1_sq();
  out.sigma2_sq = p.sigma2_sq();
  return out;
}

CombinedLossGradient combined_loss_gradient(double l_c, double l_q, const UncertaintyParams& p) {
  const double w1 = std::exp(-p.s1) / 2.0;
  const double w2 = std::exp(-p.s2) / 2.0;
  return {w1, w2, -w1 * l_c + 0.5, -w2 * l_q + 0.5};
}

std::string_view TrainModeName(TrainMode mode) {
  switch (mode) {
    case TrainMode::kMultitaskUncertainty: return "multitask_uncertainty";
    case TrainMode::kMultitaskFixed: return "multitask_fixed";
    case TrainMode::kClassificationOnly: return "classification_only";
    case TrainMode::kRegressionOnly: return "regression_only";
  }
  return "multitask_uncertainty";
}

TrainMode ParseTrainMode(std::string_view name) {
  if (name == "multitask_uncertainty" || name == "uncertainty") return TrainMode::kMultitaskUncertainty;
  if (name == "multitask_fixed" || name == "fixed") return TrainMode::kMultitaskFixed;
  if (name == "classification_only") return TrainMode::kClassificationOnly;
  if (name == "regression_only") return TrainMode::kRegressionOnly;
  throw Error(ErrorKind::kValidation, "unknown training mode '" + std::string(name) + "'");
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw Error(ErrorKind::kValidation, "lr must be > 0");
  if (!(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0)) {
    throw Error(ErrorKind::kValidation, "lr_decay must be in (0, 1]");
  }
  if (cfg.decay_period < 1) throw Error(ErrorKind::kValidation, "decay_period must be >= 1");
  if (cfg.epochs < 1) throw Error(ErrorKind::kValidation, "epochs must be >= 1");
  if (cfg.batch_size < 1) throw Error(ErrorKind::kValidation, "batch_size must be >= 1");
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  return cfg.lr * std::pow(cfg.lr_decay, epoch / cfg.decay_period);
}

Model::Model(ModelConfig cfg)
    : cfg_(std::move(cfg)),
      backbone_(cfg_.backbone),
      classifier_("classifier",
                  HeadSpec{fused_dimension(cfg_.backbone, cfg_.stage_mask), cfg_.hidden_dim,
                           HeadTask::kClassification}),
      regressor_("regressor",
                 HeadSpec{fused_dimension(cfg_.backbone, cfg_.stage_mask), cfg_.hidden_dim,
                          HeadTask::kRegression}),
      s1_("s1", {1}),
      s2_("s2", {1}) {
  if (fused_dimension(cfg_.backbone, cfg_.stage_mask) == 0) {
    throw Error(ErrorKind::kEmptyFusion, "stage mask enables no stage");
  }
  std::mt19937_64 rng(cfg_.head_seed);
  classifier_.init(rng);
  regressor_.init(rng);
}

void Model::set_uncertainty(const UncertaintyParams& p) {
  s1_.value[0] = p.s1;
  s2_.value[0] = p.s2;
}

QualityFeature Model::feature(const RgbImage& patch) const {
  const auto sf = backbone_.extract_stage_maps(fit_to_input(patch, cfg_.backbone.input_size));
  return fuse_features(sf, cfg_.stage_mask);
}

PatchPrediction Model::predict_patch(const RgbImage& patch) const {
  const QualityFeature f = feature(patch);
  return {classify_patch(f, classifier_)[0], to_mos(regress_patch(f, regressor_))};
}

ImagePrediction Model::predict(std::span<const RgbImage> patches) const {
  std::vector<PatchPrediction> preds;
  preds.reserve(patches.size());
  for (const auto& p : patches) preds.push_back(predict_patch(p));
  return pool_image(preds);
}

std::vector<std::pair<std::string, Param*>> Model::named_params() {
  std::vector<std::pair<std::string, Param*>> out;
  for (Param* p : backbone_.params()) out.emplace_back("backbone/" + p->name, p);
  for (Param* p : classifier_.params()) out.emplace_back("heads/" + p->name, p);
  for (Param* p : regressor_.params()) out.emplace_back("heads/" + p->name, p);
  out.emplace_back("uncertainty/s1", &s1_);
  out.emplace_back("uncertainty/s2", &s2_);
  return out;
}

void Model::zero_grad() {
  for (auto& [name, p] : named_params()) p->zero_grad();
}

Model::ImageLosses Model::losses(const TrainSample& sample, bool need_c, bool need_q,
                                 bool per_patch) const {
  CheckSample(sample);
  const double n = static_cast<double>(sample.patches.size());
  double sum_y = 0.0, sum_q = 0.0, sum_lc = 0.0, sum_lq = 0.0;
  for (const auto& patch : sample.patches) {
    const QualityFeature f = feature(patch);
    if (need_c) {
      const double y = classify_patch(f, classifier_)[0];
      sum_y += y;
      sum_lc += bce_loss(y, sample.y_label);
    }
    if (need_q) {
      const double q = to_mos(regress_patch(f, regressor_));
      sum_q += q;
      sum_lq += mse_loss(q, sample.q_mos);
    }
  }
  ImageLosses out;
  if (need_c) out.l_c = per_patch ? sum_lc / n : bce_loss(sum_y / n, sample.y_label);
  if (need_q) out.l_q = per_patch ? sum_lq / n : mse_loss(sum_q / n, sample.q_mos);
  return out;
}

Model::ImageLosses Model::accumulate_gradients(const TrainSample& sample, double coef_c,
                                               double coef_q, bool per_patch,
                                               bool freeze_backbone) {
  CheckSample(sample);
  const bool need_c = coef_c != 0.0;
  const bool need_q = coef_q != 0.0;
  const std::size_t count = sample.patches.size();
  const double n = static_cast<double>(count);

  // Keep every patch's activations when they fit the budget, otherwise
  // recompute them one patch at a time for the backward pass.
  const bool keep_traces =
      !freeze_backbone && TraceBytes(cfg_.backbone) * count <= kTraceBudgetBytes;
  if (trace_pool_.size() < (keep_traces ? count : 1)) trace_pool_.resize(keep_traces ? count : 1);
  std::vector<Backbone::Trace>& traces = trace_pool_;
  std::vector<StageFeatures> stage_feats(keep_traces ? count : 0);

  std::vector<RgbImage> inputs;
  std::vector<std::vector<double>> feats(count);
  std::vector<MlpHead::Cache> c_cache(count), r_cache(count);
  std::vector<std::array<double, 2>> probs(count);
  std::vector<double> qs(count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    inputs.push_back(fit_to_input(sample.patches[i], cfg_.backbone.input_size));
    if (keep_traces) {
      stage_feats[i] = backbone_.forward(backbone_.normalize(inputs[i]), &traces[i]);
      feats[i] = fuse_features(stage_feats[i], cfg_.stage_mask).vector;
    } else {
      feats[i] = fuse_features(backbone_.extract_stage_maps(inputs[i]), cfg_.stage_mask).vector;
    }
    if (need_c) {
      const auto z = classifier_.forward(feats[i], &c_cache[i]);
      probs[i] = softmax2(z[0], z[1]);
    }
    if (need_q) qs[i] = to_mos(regressor_.forward(feats[i], &r_cache[i])[0]);
  }

  ImageLosses out;
  std::vector<double> dy(count, 0.0), dq(count, 0.0);
  if (need_c) {
    if (per_patch) {
      double sum = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        sum += bce_loss(probs[i][0], sample.y_label);
        dy[i] = coef_c * bce_loss_derivative(probs[i][0], sample.y_label) / n;
      }
      out.l_c = sum / n;
    } else {
      double y_pred = 0.0;
      for (const auto& p : probs) y_pred += p[0];
      y_pred /= n;
      out.l_c = bce_loss(y_pred, sample.y_label);
      std::fill(dy.begin(), dy.end(), coef_c * bce_loss_derivative(y_pred, sample.y_label) / n);
    }
  }
  if (need_q) {
    if (per_patch) {
      double sum = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        sum += mse_loss(qs[i], sample.q_mos);
        dq[i] = coef_q * 2.0 * (qs[i] - sample.q_mos) / n;
      }
      out.l_q = sum / n;
    } else {
      const double q_score = std::accumulate(qs.begin(), qs.end(), 0.0) / n;
      out.l_q = mse_loss(q_score, sample.q_mos);
      std::fill(dq.begin(), dq.end(), coef_q * 2.0 * (q_score - sample.q_mos) / n);
    }
  }

  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> df = ZerosLike(feats[i]);
    if (need_c) {
      const double p0 = probs[i][0], p1 = probs[i][1];
      const std::array<double, 2> dz = {dy[i] * p0 * p1, -dy[i] * p0 * p1};
      const auto g = classifier_.backward(c_cache[i], dz);
      for (std::size_t k = 0; k < df.size(); ++k) df[k] += g[k];
    }
    if (need_q) {
      const std::array<double, 1> dout = {dq[i] * mos_scale};
      const auto g = regressor_.backward(r_cache[i], dout);
      for (std::size_t k = 0; k < df.size(); ++k) df[k] += g[k];
    }
    if (freeze_backbone) continue;
    if (keep_traces) {
      backbone_.backward(traces[i], SplitFeatureGradient(stage_feats[i], cfg_.stage_mask, df));
    } else {
      const StageFeatures sf = backbone_.forward(backbone_.normalize(inputs[i]), &traces[0]);
      backbone_.backward(traces[0], SplitFeatureGradient(sf, cfg_.stage_mask, df));
    }
  }
  return out;
}

void Adam::step(const std::vector<std::pair<std::string, Param*>>& params, double lr) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(state.step));
  for (const auto& [name, p] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != p->size()) m.assign(p->size(), 0.0);
    if (v.size() != p->size()) v.assign(p->size(), 0.0);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double g = p->grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p->value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

double objective_value(const TrainConfig& cfg, std::optional<double> l_c,
                       std::optional<double> l_q, const UncertaintyParams& p) {
  switch (cfg.mode) {
    case TrainMode::kMultitaskUncertainty:
      return combined_loss(l_c.value_or(0.0), l_q.value_or(0.0), p).l_overall;
    case TrainMode::kMultitaskFixed:
      return cfg.w_c * l_c.value_or(0.0) + cfg.w_q * l_q.value_or(0.0);
    case TrainMode::kClassificationOnly:
      return l_c.value_or(0.0);
    case TrainMode::kRegressionOnly:
      return l_q.value_or(0.0);
  }
  return 0.0;
}

TrainResult train(Model& model, std::span<const TrainSample> data, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  validate(cfg);
  if (data.empty()) throw Error(ErrorKind::kEmptyInput, "no training samples");
  const bool uses_labels = cfg.mode != TrainMode::kRegressionOnly;
  for (const auto& s : data) {
    CheckSample(s);
    if (uses_labels && s.y_label != 0 && s.y_label != 1) {
      throw Error(ErrorKind::kValidation, "sample '" + s.id + "' needs a binary label");
    }
    if (!std::isfinite(s.q_mos)) {
      throw Error(ErrorKind::kValidation, "sample '" + s.id + "' has a non-finite MOS");
    }
  }

  if (cfg.standardize_mos && model.epochs_trained == 0) {
    double mean = 0.0, ss = 0.0;
    for (const auto& s : data) mean += s.q_mos;
    mean /= static_cast<double>(data.size());
    for (const auto& s : data) ss += (s.q_mos - mean) * (s.q_mos - mean);
    const double sd = std::sqrt(ss / static_cast<double>(data.size()));
    model.mos_offset = mean;
    model.mos_scale = sd > 0.0 ? sd : 1.0;
  }

  std::vector<std::pair<std::string, Param*>> trainable;
  for (auto& entry : model.named_params()) {
    if (cfg.freeze_backbone && entry.first.starts_with("backbone/")) continue;
    if (cfg.mode != TrainMode::kMultitaskUncertainty && entry.first.starts_with("uncertainty/")) {
      continue;
    }
    trainable.push_back(entry);
  }

  Adam adam;
  TrainResult result;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    std::mt19937_64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng() % i]);
    }

    double sum_lc = 0.0, sum_lq = 0.0, sum_obj = 0.0;
    bool has_c = false, has_q = false;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double b = static_cast<double>(stop - start);
      model.zero_grad();
      const UncertaintyParams params = model.uncertainty();
      const Coefficients coef = CoefficientsFor(cfg, params);
      double batch_lc = 0.0, batch_lq = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const auto l = model.accumulate_gradients(data[order[k]], coef.c / b, coef.q / b,
                                                  cfg.per_patch_loss, cfg.freeze_backbone);
        if (l.l_c) batch_lc += *l.l_c;
        if (l.l_q) batch_lq += *l.l_q;
      }
      batch_lc /= b;
      batch_lq /= b;
      std::optional<double> lc = coef.need_c ? std::optional(batch_lc) : std::nullopt;
      std::optional<double> lq = coef.need_q ? std::optional(batch_lq) : std::nullopt;
      const double obj = objective_value(cfg, lc, lq, params);
      if (!std::isfinite(obj)) {
        throw TrainingDivergedError(epoch, "objective became non-finite");
      }
      if (cfg.mode == TrainMode::kMultitaskUncertainty) {
        const auto g = combined_loss_gradient(batch_lc, batch_lq, params);
        for (auto& [name, p] : trainable) {
          if (name == "uncertainty/s1") p->grad[0] += g.d_s1;
          if (name == "uncertainty/s2") p->grad[0] += g.d_s2;
        }
      }
      adam.step(trainable, lr);
      has_c = has_c || coef.need_c;
      has_q = has_q || coef.need_q;
      sum_lc += batch_lc * b;
      sum_lq += batch_lq * b;
      sum_obj += obj * b;
    }

    const double n = static_cast<double>(order.size());
    EpochLog row;
    row.epoch = epoch;
    if (has_c) row.l_c = sum_lc / n;
    if (has_q) row.l_q = sum_lq / n;
    row.l_overall = sum_obj / n;
    row.sigma1_sq = model.uncertainty().sigma1_sq();
    row.sigma2_sq = model.uncertainty().sigma2_sq();
    row.lr = lr;
    for (auto& [name, p] : trainable) {
      for (double v : p->value) {
        if (!std::isfinite(v)) throw TrainingDivergedError(epoch, name + " became non-finite");
      }
    }
    ++model.epochs_trained;
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  result.optimizer = adam.state;
  return result;
}

void write_train_log_csv(std::ostream& out, std::span<const EpochLog> log) {
  out << "epoch,l_c,l_q,l_overall,sigma1_sq,sigma2_sq,lr\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  for (const auto& row : log) {
    out << row.epoch << ',' << (row.l_c ? num(*row.l_c) : "NA") << ','
        << (row.l_q ? num(*row.l_q) : "NA") << ',' << num(row.l_overall) << ','
        << num(row.sigma1_sq) << ',' << num(row.sigma2_sq) << ',' << num(row.lr) << '\n';
  }
}

GradientCheckResult finite_difference_check(Model& model, const TrainSample& sample,
                                            const TrainConfig& cfg, double step,
                                            int max_params, const std::string& name_prefix) {
  const auto objective = [&]() {
    const Coefficients coef = CoefficientsFor(cfg, model.uncertainty());
    const auto l = model.losses(sample, coef.need_c, coef.need_q, cfg.per_patch_loss);
    return objective_value(cfg, l.l_c, l.l_q, model.uncertainty());
  };

  model.zero_grad();
  const UncertaintyParams params = model.uncertainty();
  const Coefficients coef = CoefficientsFor(cfg, params);
  const auto l = model.accumulate_gradients(sample, coef.c, coef.q, cfg.per_patch_loss, false);
  auto named = model.named_params();
  if (cfg.mode == TrainMode::kMultitaskUncertainty) {
    const auto g = combined_loss_gradient(l.l_c.value_or(0.0), l.l_q.value_or(0.0), params);
    for (auto& [name, p] : named) {
      if (name == "uncertainty/s1") p->grad[0] += g.d_s1;
      if (name == "uncertainty/s2") p->grad[0] += g.d_s2;
    }
  }

  std::vector<std::pair<std::string, Param*>> blocks;
  std::size_t total = 0;
  for (auto& entry : named) {
    if (!entry.first.starts_with(name_prefix)) continue;
    blocks.push_back(entry);
    total += entry.second->size();
  }
  GradientCheckResult result;
  if (blocks.empty() || max_params < 1) return result;

  // One probe at the start of every block, the rest spread evenly.
  std::vector<std::pair<Param*, std::size_t>> probes;
  std::vector<std::string> probe_names;
  const std::size_t budget = static_cast<std::size_t>(max_params);
  const std::size_t extra = budget > blocks.size() ? budget - blocks.size() : 0;
  for (auto& [name, p] : blocks) {
    const std::size_t share = std::max<std::size_t>(1, extra * p->size() / std::max<std::size_t>(total, 1));
    const std::size_t count = std::min(p->size(), share + 1);
    for (std::size_t k = 0; k < count; ++k) {
      probes.emplace_back(p, k * p->size() / count);
      probe_names.push_back(name + "[" + std::to_string(k * p->size() / count) + "]");
    }
  }

  for (std::size_t i = 0; i < probes.size(); ++i) {
    auto [p, idx] = probes[i];
    const double analytic = p->grad[idx];
    const double saved = p->value[idx];
    p->value[idx] = saved + step;
    const double up = objective();
    p->value[idx] = saved - step;
    const double down = objective();
    p->value[idx] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic - numeric) / denom;
    if (result.checked == 0 || rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_param = probe_names[i];
    }
    ++result.checked;
  }
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const AdamState* optimizer) {
  Archive archive;
  auto& mutable_model = const_cast<Model&>(model);
  model.backbone().save_to(archive);
  for (auto& [name, p] : mutable_model.named_params()) {
    archive.tensors[name] = TensorRecord{p->shape, p->value};
  }
  const auto& cfg = model.config();
  archive.meta["kind"] = "uhdiqa-checkpoint";
  archive.meta["stage_mask"] = StageMaskString(cfg.stage_mask);
  archive.meta["hidden_dim"] = cfg.hidden_dim;
  archive.meta["head_seed"] = cfg.head_seed;
  archive.meta["epochs_trained"] = model.epochs_trained;
  archive.meta["mos_affine"] = {model.mos_offset, model.mos_scale};
  if (model.mos_range) {
    archive.meta["mos_range"] = {model.mos_range->first, model.mos_range->second};
  }
  if (optimizer) {
    archive.meta["adam_step"] = optimizer->step;
    for (const auto& [name, m] : optimizer->m) {
      archive.tensors["optimizer/m/" + name] = TensorRecord{{static_cast<int>(m.size())}, m};
    }
    for (const auto& [name, v] : optimizer->v) {
      archive.tensors["optimizer/v/" + name] = TensorRecord{{static_cast<int>(v.size())}, v};
    }
  }
  write_archive(path, archive);
}

Model load_checkpoint(const std::filesystem::path& path, AdamState* optimizer) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::kWeightsLoad, "checkpoint not found: " + path.string());
  }
  const Archive archive = read_archive(path);
  const auto& meta = archive.meta;
  if (!meta.contains("backbone") || !meta.contains("stage_mask")) {
    throw Error(ErrorKind::kWeightsLoad, path.string() + " is not a model checkpoint");
  }
  ModelConfig cfg;
  const auto& bb = meta.at("backbone");
  cfg.backbone.name = bb.at("name").get<std::string>();
  cfg.backbone.stage_channels = bb.at("stage_channels").get<std::array<int, 4>>();
  cfg.backbone.input_size = bb.at("input_size").get<int>();
  cfg.backbone.weights = RandomInit{0};
  if (meta.contains("normalization")) {
    cfg.backbone.mean = meta["normalization"].at("mean").get<std::array<double, 3>>();
    cfg.backbone.stddev = meta["normalization"].at("std").get<std::array<double, 3>>();
  }
  cfg.stage_mask = ParseStageMask(meta.at("stage_mask").get<std::string>());
  cfg.hidden_dim = meta.value("hidden_dim", 128);
  cfg.head_seed = meta.value("head_seed", std::uint64_t{0});

  Model model(cfg);
  for (auto& [name, p] : model.named_params()) {
    const auto it = archive.tensors.find(name);
    if (it == archive.tensors.end()) {
      throw Error(ErrorKind::kWeightsLoad, "checkpoint lacks tensor " + name);
    }
    if (it->second.shape != p->shape) {
      throw Error(ErrorKind::kShape, "checkpoint tensor " + name + " has the wrong shape");
    }
    p->value = it->second.values;
  }
  model.epochs_trained = meta.value("epochs_trained", 0);
  if (meta.contains("mos_affine")) {
    model.mos_offset = meta["mos_affine"][0].get<double>();
    model.mos_scale = meta["mos_affine"][1].get<double>();
  }
  if (meta.contains("mos_range")) {
    model.mos_range = std::make_pair(meta["mos_range"][0].get<double>(),
                                     meta["mos_range"][1].get<double>());
  }
  if (optimizer) {
    *optimizer = AdamState{};
    optimizer->step = meta.value("adam_step", std::int64_t{0});
    for (const auto& [name, rec] : archive.tensors) {
      if (name.starts_with("optimizer/m/")) optimizer->m[name.substr(12)] = rec.values;
      if (name.starts_with("optimizer/v/")) optimizer->v[name.substr(12)] = rec.values;
    }
  }
  return model;
}

}  // namespace uhdiqa
