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

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "uhdiqa/texture.hpp"

namespace uhdiqa {
namespace {

GrayImage RandomGray(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GrayImage img(w, h);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

// Brute-force counts over every pixel and its neighbour.
std::vector<double> NaiveGlcm(const GrayImage& img, int dx, int dy, int levels,
                              bool image_area) {
  std::vector<double> m(static_cast<std::size_t>(levels) * levels, 0.0);
  double pairs = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int x2 = x + dx, y2 = y + dy;
      if (x2 < 0 || y2 < 0 || x2 >= img.width() || y2 >= img.height()) continue;
      const int a = img.at(x, y) * levels / 256, b = img.at(x2, y2) * levels / 256;
      m[a * levels + b] += 1;
      pairs += 1;
    }
  }
  const double d = image_area ? double(img.width()) * img.height() : pairs;
  for (auto& v : m) v /= d;
  return m;
}

double NaiveContrast(const GrayImage& img, int dx, int dy, bool image_area) {
  double sum = 0, pairs = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int x2 = x + dx, y2 = y + dy;
      if (x2 < 0 || y2 < 0 || x2 >= img.width() || y2 >= img.height()) continue;
      const double diff = double(img.at(x, y)) - img.at(x2, y2);
      sum += diff * diff;
      pairs += 1;
    }
  }
  return sum / (image_area ? double(img.width()) * img.height() : pairs);
}

double NaiveVariance(const GrayImage& img, int x0, int y0, int w, int h) {
  double mean = 0;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) mean += img.at(x, y);
  mean /= w * h;
  double var = 0;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) var += (img.at(x, y) - mean) * (img.at(x, y) - mean);
  return var / (w * h);
}

TEST(Glcm, ConstantImageHasOneEntry) {
  const GrayImage img(9, 7, 113);
  const auto g = compute_glcm(img, {});
  for (int k = 0; k < 256; ++k)
    for (int l = 0; l < 256; ++l) {
      if (k == 113 && l == 113) {
        EXPECT_GT(g.at(k, l), 0.0);
      } else {
        ASSERT_EQ(g.count(k, l), 0u);
      }
    }
  EXPECT_EQ(glcm_contrast(g), 0.0);
}

TEST(Glcm, TwoByTwoHandExample) {
  GrayImage img(2, 2);
  img.at(1, 0) = 255;
  img.at(1, 1) = 255;
  const auto g = compute_glcm(img, {});
  EXPECT_EQ(g.at(0, 255), 0.5);
  EXPECT_EQ(g.total_pairs(), 2u);
  EXPECT_EQ(glcm_contrast(g), 32512.5);
}

TEST(Glcm, MatchesNaiveOracle) {
  for (int trial = 0; trial < 20; ++trial) {
    const auto img = RandomGray(16, 16, 100 + trial);
    for (auto [dx, dy] : {std::pair{1, 0}, {0, 1}, {1, 1}, {1, -1}, {-2, 3}}) {
      for (int levels : {8, 256}) {
        for (bool area : {true, false}) {
          GlcmConfig cfg{dx, dy, levels,
                         area ? GlcmNormalization::kImageArea : GlcmNormalization::kValidPairs};
          const auto g = compute_glcm(img, cfg);
          const auto oracle = NaiveGlcm(img, dx, dy, levels, area);
          for (int k = 0; k < levels; ++k)
            for (int l = 0; l < levels; ++l)
              ASSERT_NEAR(g.at(k, l), oracle[k * levels + l], 1e-12);
          if (levels == 256) {
            EXPECT_NEAR(glcm_contrast(g), NaiveContrast(img, dx, dy, area), 1e-9);
          }
        }
      }
    }
  }
}

TEST(Glcm, NormalizationsDifferOnlyByScale) {
  const auto img = RandomGray(24, 12, 7);
  const double area = glcm_contrast(compute_glcm(img, {1, 0, 256, GlcmNormalization::kImageArea}));
  const double pairs = glcm_contrast(compute_glcm(img, {1, 0, 256, GlcmNormalization::kValidPairs}));
  EXPECT_NEAR(area / pairs, 23.0 * 12 / (24.0 * 12), 1e-12);
}

TEST(Glcm, RejectsBadConfig) {
  const auto img = RandomGray(4, 4, 1);
  try {
    compute_glcm(img, {0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
  }
  EXPECT_THROW(compute_glcm(img, {1, 0, 1}), Error);
  try {
    compute_glcm(img, {4, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateInput);
  }
}

TEST(Texture, ConstantPatchScoresZero) {
  const GrayImage flat(32, 32, 90);
  TextureMeasure m;
  for (auto kind : {TextureKind::kGlcmContrast, TextureKind::kVariance,
                    TextureKind::kLocalVariance, TextureKind::kGrayDiffEntropy}) {
    m.kind = kind;
    EXPECT_EQ(measure_texture(flat, m), 0.0) << TextureKindName(kind);
  }
}

TEST(Texture, LocalVarianceMatchesBlockOracle) {
  const auto img = RandomGray(32, 32, 9);
  TextureMeasure m;
  m.kind = TextureKind::kLocalVariance;
  m.block = 8;
  double sum = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) sum += NaiveVariance(img, c * 8, r * 8, 8, 8);
  EXPECT_NEAR(measure_texture(img, m), sum / 16, 1e-9);
  m.block = 40;
  EXPECT_THROW(measure_texture(img, m), Error);
}

TEST(Texture, VarianceMatchesOracle) {
  const auto img = RandomGray(21, 13, 10);
  TextureMeasure m;
  m.kind = TextureKind::kVariance;
  EXPECT_NEAR(measure_texture(img, m), NaiveVariance(img, 0, 0, 21, 13), 1e-9);
}

TEST(Texture, GrayDiffEntropyOfTwoLevelStripes) {
  GrayImage img(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.at(x, y) = (x / 2) % 2 ? 200 : 0;
  TextureMeasure m;
  m.kind = TextureKind::kGrayDiffEntropy;
  // Horizontal differences are 0 or 200, in a 4:3 ratio per row.
  const double p = 4.0 / 7, q = 3.0 / 7;
  EXPECT_NEAR(measure_texture(img, m), -(p * std::log(p) + q * std::log(q)), 1e-12);
}

TEST(Texture, AllDirectionsAveragesOffsets) {
  const auto img = RandomGray(20, 20, 11);
  TextureMeasure m;
  m.all_directions = true;
  double sum = 0;
  for (auto [dx, dy] : {std::pair{1, 0}, {0, 1}, {1, 1}, {1, -1}}) sum += NaiveContrast(img, dx, dy, true);
  EXPECT_NEAR(measure_texture(img, m), sum / 4, 1e-9);
}

TEST(Texture, RandomKindIsSeeded) {
  const auto img = RandomGray(480, 240, 12);
  TextureMeasure m;
  m.kind = TextureKind::kRandom;
  m.seed = 5;
  EXPECT_EQ(score_grid(img, 60, 60, m), score_grid(img, 60, 60, m));
  m.seed = 6;
  const auto a = score_grid(img, 60, 60, m);
  m.seed = 5;
  EXPECT_NE(a, score_grid(img, 60, 60, m));
}

TEST(TextureKinds, NamesRoundTrip) {
  for (auto k : {TextureKind::kGlcmContrast, TextureKind::kVariance, TextureKind::kLocalVariance,
                 TextureKind::kGrayDiffEntropy, TextureKind::kRandom}) {
    EXPECT_EQ(ParseTextureKind(TextureKindName(k)), k);
  }
  EXPECT_THROW(ParseTextureKind("sobel"), Error);
}

TEST(Grid, TableOfShapes) {
  const auto uhd = tile_grid(3840, 2160, 240, 240);
  ASSERT_EQ(uhd.size(), 144u);
  EXPECT_EQ(uhd[15].x0, 3600);
  EXPECT_EQ(uhd[16].x0, 0);
  EXPECT_EQ(uhd[16].y0, 240);
  EXPECT_EQ(uhd.back().y0, 1920);

  const auto one = tile_grid(100, 100, 100, 100);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].x0, 0);
  EXPECT_EQ(tile_grid(250, 250, 240, 240).size(), 1u);
  EXPECT_THROW(tile_grid(100, 100, 101, 10), Error);
}

TEST(Grid, TilesAreDisjointAndRowMajor) {
  const auto refs = tile_grid(1000, 700, 130, 90);
  const int cols = 1000 / 130;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    EXPECT_EQ(refs[i].index, static_cast<int>(i));
    EXPECT_EQ(refs[i].x0, static_cast<int>(i % cols) * 130);
    EXPECT_LE(refs[i].x0 + refs[i].sw, 1000);
    EXPECT_LE(refs[i].y0 + refs[i].sh, 700);
  }
}

TEST(Select, CheckerboardTilesWin) {
  GrayImage img(480, 240, 50);
  for (int tile : {2, 5, 7}) {
    const int x0 = (tile % 8) * 60, y0 = (tile / 8) * 60;
    for (int y = 0; y < 60; ++y)
      for (int x = 0; x < 60; ++x) img.at(x0 + x, y0 + y) = (x + y) % 2 ? 255 : 0;
  }
  const auto sel = select_patches(img, 60, 60, 3, {});
  std::vector<int> idx;
  for (const auto& r : sel) idx.push_back(r.index);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(idx, (std::vector<int>{2, 5, 7}));
}

TEST(Select, TiesBreakByIndex) {
  const GrayImage flat(480, 240, 7);
  const auto sel = select_patches(flat, 60, 60, 3, {});
  ASSERT_EQ(sel.size(), 3u);
  EXPECT_EQ(sel[0].index, 0);
  EXPECT_EQ(sel[1].index, 1);
  EXPECT_EQ(sel[2].index, 2);
}

TEST(Select, MatchesFullSortOracle) {
  const auto img = RandomGray(960, 540, 13);
  std::vector<std::pair<double, int>> scored;
  for (const auto& r : tile_grid(960, 540, 240, 240)) {
    scored.push_back({NaiveContrast(crop(img, r.x0, r.y0, 240, 240), 1, 0, true), r.index});
  }
  std::sort(scored.begin(), scored.end(), [](auto a, auto b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const auto sel = select_patches(img, 240, 240, 3, {});
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(sel[i].index, scored[i].second);
    EXPECT_NEAR(sel[i].score, scored[i].first, 1e-9);
  }
}

TEST(Select, TooManyPatchesIsAnError) {
  const auto img = RandomGray(480, 240, 14);
  try {
    select_patches(img, 240, 240, 3, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientPatches);
  }
}

TEST(Select, CsvLayout) {
  std::ostringstream out;
  write_patch_csv(out, {PatchRef{4, 240, 0, 240, 240, 12.5}});
  EXPECT_EQ(out.str(), "index,x0,y0,sw,sh,score\n4,240,0,240,240,12.500000\n");
}

}  // namespace
}  // namespace uhdiqa
