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

#include "uhdiqa/texture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>

namespace uhdiqa {

namespace {

constexpr std::array<std::array<int, 2>, 4> kAllDirections = {
    {{1, 0}, {0, 1}, {1, 1}, {1, -1}}};

// Iterates all (x, y) with (x + dx, y + dy) inside the image.
template <typename Fn>
void ForEachPair(const GrayImage& img, int dx, int dy, Fn&& fn) {
  const int w = img.width(), h = img.height();
  const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
  const int y_lo = std::max(0, -dy), y_hi = std::min(h, h - dy);
  for (int y = y_lo; y < y_hi; ++y) {
    for (int x = x_lo; x < x_hi; ++x) {
      fn(img.at(x, y), img.at(x + dx, y + dy));
    }
  }
}

bool HasPairs(const GrayImage& img, int dx, int dy) {
  return std::abs(dx) < img.width() && std::abs(dy) < img.height();
}

double PopulationVariance(const GrayImage& img, int x0, int y0, int w, int h) {
  std::int64_t sum = 0, sum_sq = 0;
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      const std::int64_t v = img.at(x, y);
      sum += v;
      sum_sq += v * v;
    }
  }
  const std::int64_t n = static_cast<std::int64_t>(w) * h;
  // n * sum_sq - sum^2 is exact, so shifted inputs give identical results.
  return static_cast<double>(n * sum_sq - sum * sum) /
         (static_cast<double>(n) * static_cast<double>(n));
}

double ContrastAt(const GrayImage& patch, GlcmConfig cfg, int dx, int dy) {
  cfg.dx = dx;
  cfg.dy = dy;
  return glcm_contrast(compute_glcm(patch, cfg));
}

}  // namespace

void validate(const GlcmConfig& cfg) {
  if (cfg.dx == 0 && cfg.dy == 0) {
    throw Error(ErrorKind::kValidation, "GLCM offset must be non-zero");
  }
  if (cfg.levels < 2 || cfg.levels > 256) {
    throw Error(ErrorKind::kValidation, "GLCM levels must be in 2..256");
  }
}

GlcmMatrix::GlcmMatrix(int levels, std::vector<std::uint64_t> counts,
                       double divisor)
    : levels_(levels), counts_(std::move(counts)), divisor_(divisor) {
  if (counts_.size() != static_cast<std::size_t>(levels) * levels || divisor <= 0) {
    throw Error(ErrorKind::kShape, "inconsistent GLCM storage");
  }
}

std::uint64_t GlcmMatrix::total_pairs() const {
  std::uint64_t total = 0;
  for (auto c : counts_) total += c;
  return total;
}

GlcmMatrix compute_glcm(const GrayImage& img, const GlcmConfig& cfg) {
  validate(cfg);
  if (!HasPairs(img, cfg.dx, cfg.dy)) {
    throw Error(ErrorKind::kDegenerateInput,
                "image too small for GLCM offset (" + std::to_string(cfg.dx) +
                    "," + std::to_string(cfg.dy) + ")");
  }
  const int levels = cfg.levels;
  std::array<std::uint8_t, 256> quant{};
  for (int v = 0; v < 256; ++v) quant[v] = static_cast<std::uint8_t>(v * levels / 256);

  std::vector<std::uint64_t> counts(static_cast<std::size_t>(levels) * levels, 0);
  std::uint64_t pairs = 0;
  ForEachPair(img, cfg.dx, cfg.dy, [&](std::uint8_t a, std::uint8_t b) {
    ++counts[static_cast<std::size_t>(quant[a]) * levels + quant[b]];
    ++pairs;
  });
  const double divisor =
      cfg.normalize_by == GlcmNormalization::kImageArea
          ? static_cast<double>(img.width()) * img.height()
          : static_cast<double>(pairs);
  return GlcmMatrix(levels, std::move(counts), divisor);
}

double glcm_contrast(const GlcmMatrix& glcm) {
  std::uint64_t weighted = 0;
  const int levels = glcm.levels();
  for (int k = 0; k < levels; ++k) {
    for (int l = 0; l < levels; ++l) {
      const std::uint64_t d = static_cast<std::uint64_t>((k - l) * (k - l));
      weighted += d * glcm.count(k, l);
    }
  }
  return static_cast<double>(weighted) / glcm.divisor();
}

std::string_view TextureKindName(TextureKind kind) {
  switch (kind) {
    case TextureKind::kGlcmContrast: return "glcm";
    case TextureKind::kVariance: return "variance";
    case TextureKind::kLocalVariance: return "local_variance";
    case TextureKind::kGrayDiffEntropy: return "gray_diff_entropy";
    case TextureKind::kRandom: return "random";
  }
  return "glcm";
}

TextureKind ParseTextureKind(std::string_view name) {
  if (name == "glcm" || name == "glcm_contrast") return TextureKind::kGlcmContrast;
  if (name == "variance") return TextureKind::kVariance;
  if (name == "local_variance") return TextureKind::kLocalVariance;
  if (name == "gray_diff_entropy" || name == "entropy") {
    return TextureKind::kGrayDiffEntropy;
  }
  if (name == "random") return TextureKind::kRandom;
  throw Error(ErrorKind::kValidation,
              "unknown texture measure '" + std::string(name) + "'");
}

double measure_texture(const GrayImage& patch, const TextureMeasure& m) {
  UniformSource rng(m.seed);
  return measure_texture(patch, m, rng);
}

double measure_texture(const GrayImage& patch, const TextureMeasure& m,
                       UniformSource& rng) {
  switch (m.kind) {
    case TextureKind::kGlcmContrast: {
      if (!m.all_directions) return ContrastAt(patch, m.glcm, m.glcm.dx, m.glcm.dy);
      double sum = 0.0;
      for (const auto& [dx, dy] : kAllDirections) sum += ContrastAt(patch, m.glcm, dx, dy);
      return sum / static_cast<double>(kAllDirections.size());
    }
    case TextureKind::kVariance:
      return PopulationVariance(patch, 0, 0, patch.width(), patch.height());
    case TextureKind::kLocalVariance: {
      const int b = m.block;
      if (b < 1 || patch.width() < b || patch.height() < b) {
        throw Error(ErrorKind::kDegenerateInput,
                    "patch smaller than local-variance block " + std::to_string(b));
      }
      const int cols = patch.width() / b, rows = patch.height() / b;
      double sum = 0.0;
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) sum += PopulationVariance(patch, c * b, r * b, b, b);
      }
      return sum / (static_cast<double>(rows) * cols);
    }
    case TextureKind::kGrayDiffEntropy: {
      if ((m.diff_dx == 0 && m.diff_dy == 0) ||
          !HasPairs(patch, m.diff_dx, m.diff_dy)) {
        throw Error(ErrorKind::kDegenerateInput,
                    "patch too small for gray-difference offset");
      }
      std::array<std::uint64_t, 256> hist{};
      std::uint64_t pairs = 0;
      ForEachPair(patch, m.diff_dx, m.diff_dy, [&](std::uint8_t a, std::uint8_t b) {
        ++hist[a > b ? a - b : b - a];
        ++pairs;
      });
      double entropy = 0.0;
      for (auto count : hist) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / static_cast<double>(pairs);
        entropy -= p * std::log(p);
      }
      // -0.0 from a single bin reads oddly in reports.
      return entropy == 0.0 ? 0.0 : entropy;
    }
    case TextureKind::kRandom:
      return rng.next();
  }
  return 0.0;
}

std::vector<PatchRef> tile_grid(int width, int height, int sw, int sh) {
  if (sw < 1 || sh < 1 || sw > width || sh > height) {
    throw Error(ErrorKind::kDegenerateInput,
                "patch " + std::to_string(sw) + "x" + std::to_string(sh) +
                    " does not fit in " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  const int cols = width / sw, rows = height / sh;
  std::vector<PatchRef> refs;
  refs.reserve(static_cast<std::size_t>(cols) * rows);
  for (int i = 0; i < cols * rows; ++i) {
    refs.push_back(PatchRef{i, (i % cols) * sw, (i / cols) * sh, sw, sh, 0.0});
  }
  return refs;
}

std::vector<PatchRef> score_grid(const GrayImage& img, int sw, int sh,
                                 const TextureMeasure& m) {
  auto refs = tile_grid(img.width(), img.height(), sw, sh);
  UniformSource rng(m.seed);
  for (auto& ref : refs) {
    ref.score = measure_texture(crop(img, ref.x0, ref.y0, sw, sh), m, rng);
    if (!std::isfinite(ref.score)) {
      throw Error(ErrorKind::kDegenerateInput, "non-finite texture score");
    }
  }
  return refs;
}

std::vector<PatchRef> rank_patches(std::vector<PatchRef> refs, int n) {
  if (n < 0 || static_cast<std::size_t>(n) > refs.size()) {
    throw Error(ErrorKind::kInsufficientPatches,
                "requested " + std::to_string(n) + " patches from a grid of " +
                    std::to_string(refs.size()));
  }
  std::stable_sort(refs.begin(), refs.end(), [](const PatchRef& a, const PatchRef& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
  });
  refs.resize(static_cast<std::size_t>(n));
  return refs;
}

std::vector<PatchRef> select_patches(const GrayImage& img, int sw, int sh, int n,
                                     const TextureMeasure& m) {
  if (sw >= 1 && sh >= 1 && sw <= img.width() && sh <= img.height()) {
    const long capacity = static_cast<long>(img.width() / sw) * (img.height() / sh);
    if (n > capacity) {
      throw Error(ErrorKind::kInsufficientPatches,
                  "requested " + std::to_string(n) + " patches from a grid of " +
                      std::to_string(capacity));
    }
  }
  return rank_patches(score_grid(img, sw, sh, m), n);
}

void write_patch_csv(std::ostream& out, const std::vector<PatchRef>& refs,
                     bool header) {
  if (header) out << "index,x0,y0,sw,sh,score\n";
  char score[64];
  for (const auto& r : refs) {
    std::snprintf(score, sizeof(score), "%.6f", r.score);
    out << r.index << ',' << r.x0 << ',' << r.y0 << ',' << r.sw << ',' << r.sh
        << ',' << score << '\n';
  }
}

}  // namespace uhdiqa
