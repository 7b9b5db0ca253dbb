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

#include "uhdiqa/backbone.hpp"

#include <fstream>

#include "uhdiqa/error.hpp"

namespace uhdiqa {

namespace {

Tensor3 Activate(Tensor3 t) {
  relu_inplace(t.data);
  return t;
}

void AddInto(Tensor3& acc, const Tensor3& g) {
  if (g.data.empty()) return;
  if (acc.data.empty()) {
    acc = g;
    return;
  }
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
}

void LoadParam(Param& p, const Archive& archive, const std::string& key) {
  const auto it = archive.tensors.find(key);
  if (it == archive.tensors.end()) {
    throw Error(ErrorKind::kWeightsLoad, "missing tensor " + key);
  }
  if (it->second.shape != p.shape || it->second.values.size() != p.value.size()) {
    throw Error(ErrorKind::kWeightsLoad, "tensor " + key + " has the wrong shape");
  }
  p.value = it->second.values;
}

}  // namespace

std::string StageMaskString(const StageMask& mask) {
  std::string s;
  for (bool b : mask) s.push_back(b ? '1' : '0');
  return s;
}

StageMask ParseStageMask(const std::string& text) {
  StageMask mask{};
  if (text.size() != 4) {
    throw Error(ErrorKind::kValidation, "stage mask must be four 0/1 digits, got '" + text + "'");
  }
  for (int i = 0; i < 4; ++i) {
    if (text[i] != '0' && text[i] != '1') {
      throw Error(ErrorKind::kValidation, "stage mask must be four 0/1 digits, got '" + text + "'");
    }
    mask[i] = text[i] == '1';
  }
  return mask;
}

void validate(const BackboneSpec& spec) {
  for (int c : spec.stage_channels) {
    if (c < 1) throw Error(ErrorKind::kValidation, "stage channels must be positive");
  }
  if (spec.input_size < 1) throw Error(ErrorKind::kValidation, "input_size must be positive");
  for (double s : spec.stddev) {
    if (!(s > 0.0)) throw Error(ErrorKind::kValidation, "normalization stddev must be positive");
  }
}

BackboneSpec backbone_family(const std::string& name) {
  BackboneSpec spec;
  spec.name = name;
  if (name == "tiny") {
    spec.stage_channels = {4, 8, 16, 32};
  } else if (name == "small") {
    spec.stage_channels = {8, 16, 32, 64};
  } else if (name == "resnet18") {
    spec.stage_channels = {64, 128, 256, 512};
  } else if (name == "resnet50" || name == "resnext50" || name == "resnet101") {
    spec.stage_channels = {256, 512, 1024, 2048};
  } else {
    throw Error(ErrorKind::kValidation, "unknown backbone family '" + name + "'");
  }
  return spec;
}

std::vector<std::string> backbone_family_names() {
  return {"tiny", "small", "resnet18", "resnet50", "resnext50", "resnet101"};
}

int fused_dimension(const BackboneSpec& spec, const StageMask& mask) {
  int dim = 0;
  for (int i = 0; i < 4; ++i) {
    if (mask[i]) dim += spec.stage_channels[i];
  }
  return dim;
}

std::vector<double> global_average_pool(const Tensor3& map) {
  if (map.data.empty()) throw Error(ErrorKind::kEmptyInput, "cannot pool an empty feature map");
  std::vector<double> out(static_cast<std::size_t>(map.channels));
  const std::size_t plane = map.plane();
  for (int c = 0; c < map.channels; ++c) {
    double sum = 0.0;
    const double* p = map.data.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    out[c] = sum / static_cast<double>(plane);
  }
  return out;
}

QualityFeature fuse_features(const StageFeatures& sf, const StageMask& stage_mask) {
  QualityFeature f;
  f.stage_mask = stage_mask;
  for (int i = 0; i < 4; ++i) {
    if (!stage_mask[i]) continue;
    const auto pooled = global_average_pool(sf.maps[i]);
    f.vector.insert(f.vector.end(), pooled.begin(), pooled.end());
  }
  if (f.vector.empty()) {
    throw Error(ErrorKind::kEmptyFusion, "stage mask enables no stage");
  }
  return f;
}

Backbone::Backbone(BackboneSpec spec)
    : spec_(std::move(spec)),
      stem_("stem.conv", 3, spec_.stage_channels[0], 3, 1) {
  validate(spec_);
  int prev = spec_.stage_channels[0];
  for (int i = 0; i < 4; ++i) {
    const std::string stage = "stage" + std::to_string(i + 1);
    conv1_.emplace_back(stage + ".conv1", prev, spec_.stage_channels[i], 3, 2);
    conv2_.emplace_back(stage + ".conv2", spec_.stage_channels[i], spec_.stage_channels[i], 3, 1);
    prev = spec_.stage_channels[i];
  }

  if (const auto* init = std::get_if<RandomInit>(&spec_.weights)) {
    std::mt19937_64 rng(init->seed);
    stem_.init_he(rng);
    for (int i = 0; i < 4; ++i) {
      conv1_[i].init_he(rng);
      conv2_[i].init_he(rng);
    }
  } else {
    const auto& file = std::get<PretrainedFile>(spec_.weights);
    if (!std::filesystem::exists(file.path)) {
      throw Error(ErrorKind::kWeightsLoad, "weights file not found: " + file.path.string());
    }
    const Archive archive = read_archive(file.path);
    load_from(archive);
    if (archive.meta.contains("normalization")) {
      const auto& norm = archive.meta["normalization"];
      spec_.mean = norm.at("mean").get<std::array<double, 3>>();
      spec_.stddev = norm.at("std").get<std::array<double, 3>>();
    }
  }
}

void Backbone::check_patch(const RgbImage& patch) const {
  if (patch.width() != spec_.input_size || patch.height() != spec_.input_size) {
    throw Error(ErrorKind::kShape,
                "patch is " + std::to_string(patch.width()) + "x" +
                    std::to_string(patch.height()) + " but the backbone expects " +
                    std::to_string(spec_.input_size) + "x" +
                    std::to_string(spec_.input_size));
  }
}

Tensor3 Backbone::normalize(const RgbImage& patch) const {
  check_patch(patch);
  Tensor3 t(3, patch.height(), patch.width());
  for (int y = 0; y < patch.height(); ++y) {
    for (int x = 0; x < patch.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        t.at(c, y, x) = (patch.at(x, y, c) / 255.0 - spec_.mean[c]) / spec_.stddev[c];
      }
    }
  }
  return t;
}

StageFeatures Backbone::extract_stage_maps(const RgbImage& patch) const {
  return forward(normalize(patch), nullptr);
}

StageFeatures Backbone::forward(const Tensor3& input, Trace* trace) const {
  StageFeatures sf;
  Tensor3 x = Activate(stem_.forward(input, trace ? &trace->stem_cache : nullptr));
  if (trace) {
    trace->input = input;
    trace->stem_out = x;
  }
  for (int i = 0; i < 4; ++i) {
    Tensor3 h = Activate(conv1_[i].forward(x, trace ? &trace->conv1_cache[i] : nullptr));
    x = Activate(conv2_[i].forward(h, trace ? &trace->conv2_cache[i] : nullptr));
    if (trace) {
      trace->conv1_out[i] = std::move(h);
      trace->stage_out[i] = x;
    }
    sf.maps[i] = x;
  }
  return sf;
}

void Backbone::backward(const Trace& trace, const std::array<Tensor3, 4>& stage_grads) {
  Tensor3 g;
  for (int i = 3; i >= 0; --i) {
    AddInto(g, stage_grads[i]);
    if (g.data.empty()) continue;
    relu_backward_inplace(trace.stage_out[i].data, g.data);
    Tensor3 dh = conv2_[i].backward(trace.conv2_cache[i], g, true);
    relu_backward_inplace(trace.conv1_out[i].data, dh.data);
    g = conv1_[i].backward(trace.conv1_cache[i], dh, true);
  }
  if (g.data.empty()) return;
  relu_backward_inplace(trace.stem_out.data, g.data);
  stem_.backward(trace.stem_cache, g, false);
}

std::vector<Param*> Backbone::params() {
  std::vector<Param*> out = {&stem_.weight, &stem_.bias};
  for (int i = 0; i < 4; ++i) {
    out.insert(out.end(), {&conv1_[i].weight, &conv1_[i].bias, &conv2_[i].weight, &conv2_[i].bias});
  }
  return out;
}

std::vector<const Param*> Backbone::params() const {
  auto mut = const_cast<Backbone*>(this)->params();
  return {mut.begin(), mut.end()};
}

nlohmann::json Backbone::stage_manifest() const {
  nlohmann::json m;
  m["stage0"] = {stem_.weight.name, stem_.bias.name};
  for (int i = 0; i < 4; ++i) {
    m["stage" + std::to_string(i + 1)] = {conv1_[i].weight.name, conv1_[i].bias.name,
                                          conv2_[i].weight.name, conv2_[i].bias.name};
  }
  return m;
}

void Backbone::save_to(Archive& archive, const std::string& prefix) const {
  for (const Param* p : params()) {
    archive.tensors[prefix + p->name] = TensorRecord{p->shape, p->value};
  }
  archive.meta["backbone"] = {
      {"name", spec_.name},
      {"stage_channels", spec_.stage_channels},
      {"input_size", spec_.input_size},
      {"stages", stage_manifest()},
  };
  archive.meta["normalization"] = {{"mean", spec_.mean}, {"std", spec_.stddev}};
}

void Backbone::load_from(const Archive& archive, const std::string& prefix) {
  for (Param* p : params()) LoadParam(*p, archive, prefix + p->name);
}

StageFeatures extract_stage_maps(const RgbImage& patch, const BackboneSpec& spec) {
  return Backbone(spec).extract_stage_maps(patch);
}

RgbImage fit_to_input(const RgbImage& patch, int input_size) {
  if (patch.width() == input_size && patch.height() == input_size) return patch;
  if (patch.width() >= input_size && patch.height() >= input_size) {
    return crop(patch, (patch.width() - input_size) / 2,
                (patch.height() - input_size) / 2, input_size, input_size);
  }
  return resample(patch, input_size, input_size, ResampleKernel::kBilinear);
}

}  // namespace uhdiqa
