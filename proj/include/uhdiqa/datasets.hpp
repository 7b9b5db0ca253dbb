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
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "uhdiqa/imaging.hpp"

namespace uhdiqa {

enum class Label { kTrue4k, kPseudo4k, kUnlabeled };
enum class MediaKind { kImage, kFrameDir };

std::string_view LabelName(Label l);
Label ParseLabel(std::string_view s);
std::string_view MediaKindName(MediaKind k);
MediaKind ParseMediaKind(std::string_view s);

struct ManifestEntry {
  std::filesystem::path media_path;  // resolved against the manifest directory
  std::string scene_id;
  double mos = 0.0;
  double mos_lo = 0.0;
  double mos_hi = 100.0;
  Label label = Label::kUnlabeled;
  MediaKind media_kind = MediaKind::kImage;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline constexpr const char* kManifestHeader = "media_path,scene_id,mos,mos_lo,mos_hi,label,media_kind";

void validate(const ManifestEntry& e);

// CSV with header kManifestHeader. Fields may not contain commas.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

// Paths are written relative to base_dir when they live under it.
void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& base_dir);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

std::vector<std::string> distinct_scenes(const std::vector<ManifestEntry>& entries);

struct SplitSpec {
  std::vector<std::string> train_scenes;  // sorted
  std::vector<std::string> test_scenes;   // sorted
  int trial_index = 0;
  std::uint64_t seed = 0;

  // Stable hash of the scene partition, for pairing runs across experiments.
  std::string fingerprint() const;
};

// Per trial: shuffle distinct scenes with a trial-derived seed and put the
// first round(ratio * scenes) on the training side (at least one per side).
std::vector<SplitSpec> make_scene_splits(const std::vector<ManifestEntry>& entries,
                                         double ratio = 0.8, int trials = 10,
                                         std::uint64_t seed = 0);

// Entries whose scene falls on the requested side.
std::vector<ManifestEntry> select_side(const std::vector<ManifestEntry>& entries,
                                       const std::vector<std::string>& scenes);

// Frames at t = 0, interval, 2*interval, ... read from a directory of image
// files (sorted by name) with an fps.txt sidecar.
std::vector<std::filesystem::path> sample_frames(const std::filesystem::path& frame_dir,
                                                 double interval = 0.5);

struct SyntheticVariant {
  int factor = 2;
  ResampleKernel kernel = ResampleKernel::kBilinear;
};

struct SyntheticSpec {
  int scenes = 8;
  int width = 960;
  int height = 540;
  std::vector<int> downscale_factors = {2, 3};
  std::vector<ResampleKernel> kernels = {ResampleKernel::kBilinear};
  // When non-empty, replaces the factors x kernels product.
  std::vector<SyntheticVariant> variants;
  std::uint64_t seed = 0;
  double mos_lo = 0.0;
  double mos_hi = 100.0;
  double span = 50.0;
  int tile = 240;  // grid used to place the guaranteed high-texture tiles
};

void validate(const SyntheticSpec& spec);
std::vector<SyntheticVariant> expand_variants(const SyntheticSpec& spec);

// hi - span * (1 - 1 / factor)
double synthetic_mos(const SyntheticSpec& spec, int factor);

RgbImage render_scene(const SyntheticSpec& spec, int scene_index);

// Writes out_dir/scene_<k>/{pristine.png, f<factor>_<kernel>.png} and
// out_dir/manifest.csv; returns the manifest entries.
std::vector<ManifestEntry> generate_synthetic(const SyntheticSpec& spec,
                                              const std::filesystem::path& out_dir);

}  // namespace uhdiqa
