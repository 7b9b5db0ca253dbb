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
#include <iosfwd>
#include <random>
#include <string_view>
#include <vector>

#include "uhdiqa/imaging.hpp"

namespace uhdiqa {

enum class GlcmNormalization {
  kImageArea,   // divide by W*H, as in the original GLCM definition
  kValidPairs,  // divide by the number of in-bounds pixel pairs
};

struct GlcmConfig {
  int dx = 1;
  int dy = 0;
  int levels = 256;
  GlcmNormalization normalize_by = GlcmNormalization::kImageArea;
};

void validate(const GlcmConfig& cfg);

// Co-occurrence counts for one offset plus the divisor that normalizes them.
// Counts are kept exact so contrast ranks are free of summation-order noise.
class GlcmMatrix {
 public:
  GlcmMatrix(int levels, std::vector<std::uint64_t> counts, double divisor);

  int levels() const noexcept { return levels_; }
  double divisor() const noexcept { return divisor_; }
  std::uint64_t count(int k, int l) const {
    return counts_[static_cast<std::size_t>(k) * levels_ + l];
  }
  double at(int k, int l) const { return static_cast<double>(count(k, l)) / divisor_; }
  std::uint64_t total_pairs() const;

 private:
  int levels_;
  std::vector<std::uint64_t> counts_;
  double divisor_;
};

GlcmMatrix compute_glcm(const GrayImage& img, const GlcmConfig& cfg);

// Sum over (k - l)^2 * GLCM(k, l).
double glcm_contrast(const GlcmMatrix& glcm);

enum class TextureKind {
  kGlcmContrast,
  kVariance,
  kLocalVariance,
  kGrayDiffEntropy,
  kRandom,
};

std::string_view TextureKindName(TextureKind kind);
TextureKind ParseTextureKind(std::string_view name);

struct TextureMeasure {
  TextureKind kind = TextureKind::kGlcmContrast;
  GlcmConfig glcm;
  // Average contrast over (1,0), (0,1), (1,1), (1,-1) instead of glcm.dx/dy.
  bool all_directions = false;
  int block = 8;  // local variance block side
  int diff_dx = 1;
  int diff_dy = 0;
  std::uint64_t seed = 0;
};

// Source of uniform draws for TextureKind::kRandom. Not thread-safe; give
// each worker its own instance.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}
  double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

double measure_texture(const GrayImage& patch, const TextureMeasure& m);
double measure_texture(const GrayImage& patch, const TextureMeasure& m,
                       UniformSource& rng);

struct PatchRef {
  int index = 0;
  int x0 = 0;
  int y0 = 0;
  int sw = 0;
  int sh = 0;
  double score = 0.0;

  friend bool operator==(const PatchRef&, const PatchRef&) = default;
};

// Non-overlapping row-major grid; right and bottom remainders are dropped.
std::vector<PatchRef> tile_grid(int width, int height, int sw, int sh);

// Scores every tile of the grid, in grid order.
std::vector<PatchRef> score_grid(const GrayImage& img, int sw, int sh,
                                 const TextureMeasure& m);

// Top n by descending score, ties to the smaller grid index.
std::vector<PatchRef> rank_patches(std::vector<PatchRef> refs, int n);

std::vector<PatchRef> select_patches(const GrayImage& img, int sw, int sh, int n,
                                     const TextureMeasure& m);

// index,x0,y0,sw,sh,score with six decimals.
void write_patch_csv(std::ostream& out, const std::vector<PatchRef>& refs,
                     bool header = true);

}  // namespace uhdiqa
