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

#include "uhdiqa/datasets.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "uhdiqa/error.hpp"

namespace uhdiqa {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string Trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double ParseNumber(const std::string& text, const std::string& what, int line) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw Error(ErrorKind::kParse, "line " + std::to_string(line) + ": bad " + what + " '" + text + "'");
  }
  return v;
}

std::string FormatNumber(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t Fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

bool IsFrameFile(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

// Smooth field from bilinear interpolation of random lattice values.
std::vector<double> ValueNoise(int w, int h, int cell, std::mt19937_64& rng) {
  const int gw = w / cell + 2, gh = h / cell + 2;
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& v : lattice) v = uni(rng);
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y) / cell;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / cell;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      const auto at = [&](int gx, int gy) { return lattice[static_cast<std::size_t>(gy) * gw + gx]; };
      const double top = at(x0, y0) * (1 - tx) + at(x0 + 1, y0) * tx;
      const double bottom = at(x0, y0 + 1) * (1 - tx) + at(x0 + 1, y0 + 1) * tx;
      out[static_cast<std::size_t>(y) * w + x] = top * (1 - ty) + bottom * ty;
    }
  }
  return out;
}

// Rows of short strokes resembling printed text inside a rectangle.
void DrawGlyphBlock(std::vector<double>& rgb, int w, int h, int x0, int y0, int bw, int bh,
                    std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> glyph_w(4, 9);
  std::uniform_int_distribution<int> glyph_h(7, 12);
  std::uniform_real_distribution<double> ink_dark(10.0, 60.0);
  std::uniform_real_distribution<double> ink_light(200.0, 250.0);
  double mean = 0.0;
  int count = 0;
  for (int y = std::max(0, y0); y < std::min(h, y0 + bh); ++y) {
    for (int x = std::max(0, x0); x < std::min(w, x0 + bw); ++x) {
      for (int c = 0; c < 3; ++c) mean += rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c];
      count += 3;
    }
  }
  // Ink sits at the far end from the block's own brightness.
  const double ink = mean / std::max(count, 1) > 128.0 ? ink_dark(rng) : ink_light(rng);
  auto plot = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    for (int c = 0; c < 3; ++c) rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] = ink;
  };
  for (int line_y = y0 + 4; line_y + 14 < y0 + bh; line_y += 16) {
    int x = x0 + 4;
    while (x + 10 < x0 + bw) {
      const int gw = glyph_w(rng), gh = glyph_h(rng);
      const int strokes = 2 + coin(rng) + coin(rng);
      for (int s = 0; s < strokes; ++s) {
        if (coin(rng)) {
          const int sy = line_y + static_cast<int>(rng() % static_cast<unsigned>(gh));
          for (int k = 0; k < gw; ++k) plot(x + k, sy);
        } else {
          const int sx = x + static_cast<int>(rng() % static_cast<unsigned>(gw));
          for (int k = 0; k < gh; ++k) plot(sx, line_y + k);
        }
      }
      x += gw + 3 + static_cast<int>(rng() % 4);
    }
  }
}

}  // namespace

std::string_view LabelName(Label l) {
  switch (l) {
    case Label::kTrue4k: return "true_4k";
    case Label::kPseudo4k: return "pseudo_4k";
    case Label::kUnlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label ParseLabel(std::string_view s) {
  if (s == "true_4k") return Label::kTrue4k;
  if (s == "pseudo_4k") return Label::kPseudo4k;
  if (s == "unlabeled" || s.empty()) return Label::kUnlabeled;
  throw Error(ErrorKind::kParse, "unknown label '" + std::string(s) + "'");
}

std::string_view MediaKindName(MediaKind k) {
  return k == MediaKind::kImage ? "image" : "frame_dir";
}

MediaKind ParseMediaKind(std::string_view s) {
  if (s == "image") return MediaKind::kImage;
  if (s == "frame_dir") return MediaKind::kFrameDir;
  throw Error(ErrorKind::kParse, "unknown media kind '" + std::string(s) + "'");
}

void validate(const ManifestEntry& e) {
  if (e.scene_id.empty()) throw Error(ErrorKind::kValidation, "empty scene_id");
  if (!(e.mos_lo < e.mos_hi)) {
    throw Error(ErrorKind::kValidation, "MOS range must satisfy lo < hi");
  }
  if (!(e.mos >= e.mos_lo && e.mos <= e.mos_hi)) {
    throw Error(ErrorKind::kValidation, "MOS " + FormatNumber(e.mos) + " outside [" +
                                            FormatNumber(e.mos_lo) + ", " +
                                            FormatNumber(e.mos_hi) + "]");
  }
}

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::string line;
  if (!std::getline(in, line) || Trim(line) != kManifestHeader) {
    throw Error(ErrorKind::kParse, "line 1: manifest header must be '" + std::string(kManifestHeader) + "'");
  }
  std::vector<ManifestEntry> entries;
  std::map<fs::path, int> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = Trim(line);
    if (line.empty()) continue;
    const auto f = SplitCsvLine(line);
    if (f.size() != 7) {
      throw Error(ErrorKind::kParse, "line " + std::to_string(line_no) + ": expected 7 fields, got " +
                                         std::to_string(f.size()));
    }
    ManifestEntry e;
    const fs::path raw = Trim(f[0]);
    if (raw.empty()) throw Error(ErrorKind::kParse, "line " + std::to_string(line_no) + ": empty media_path");
    e.media_path = (raw.is_absolute() ? raw : base / raw).lexically_normal();
    e.scene_id = Trim(f[1]);
    e.mos = ParseNumber(Trim(f[2]), "mos", line_no);
    e.mos_lo = ParseNumber(Trim(f[3]), "mos_lo", line_no);
    e.mos_hi = ParseNumber(Trim(f[4]), "mos_hi", line_no);
    try {
      e.label = ParseLabel(Trim(f[5]));
      e.media_kind = ParseMediaKind(Trim(f[6]));
      validate(e);
    } catch (const Error& err) {
      throw Error(err.kind(), "line " + std::to_string(line_no) + ": " + err.detail());
    }
    if (const auto it = seen.find(e.media_path); it != seen.end()) {
      throw Error(ErrorKind::kDuplicate, "media_path " + raw.string() + " appears on lines " +
                                             std::to_string(it->second) + " and " +
                                             std::to_string(line_no));
    }
    seen.emplace(e.media_path, line_no);
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries,
                    const fs::path& base_dir) {
  out << kManifestHeader << '\n';
  const fs::path base = base_dir.lexically_normal();
  for (const auto& e : entries) {
    fs::path p = e.media_path;
    const fs::path rel = p.lexically_relative(base);
    if (!base.empty() && !rel.empty() && *rel.begin() != "..") p = rel;
    out << p.generic_string() << ',' << e.scene_id << ',' << FormatNumber(e.mos) << ','
        << FormatNumber(e.mos_lo) << ',' << FormatNumber(e.mos_hi) << ',' << LabelName(e.label)
        << ',' << MediaKindName(e.media_kind) << '\n';
  }
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_manifest(out, entries, path.parent_path());
}

std::vector<std::string> distinct_scenes(const std::vector<ManifestEntry>& entries) {
  std::set<std::string> scenes;
  for (const auto& e : entries) scenes.insert(e.scene_id);
  return {scenes.begin(), scenes.end()};
}

std::string SplitSpec::fingerprint() const {
  std::string text = "train:";
  for (const auto& s : train_scenes) text += s + ",";
  text += ";test:";
  for (const auto& s : test_scenes) text += s + ",";
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(Fnv1a(text)));
  return buf;
}

std::vector<SplitSpec> make_scene_splits(const std::vector<ManifestEntry>& entries, double ratio,
                                         int trials, std::uint64_t seed) {
  const auto scenes = distinct_scenes(entries);
  if (scenes.size() < 2) {
    throw Error(ErrorKind::kSplitImpossible, "need at least two distinct scenes to split");
  }
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::kValidation, "split ratio must be in (0, 1)");
  if (trials < 1) throw Error(ErrorKind::kValidation, "trials must be >= 1");
  const std::size_t n = scenes.size();
  const std::size_t n_train =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))), 1, n - 1);

  std::vector<SplitSpec> splits;
  for (int t = 0; t < trials; ++t) {
    std::vector<std::string> order = scenes;
    std::mt19937_64 rng(MixSeed(seed, static_cast<std::uint64_t>(t)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    SplitSpec s;
    s.trial_index = t;
    s.seed = seed;
    s.train_scenes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test_scenes.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(s.train_scenes.begin(), s.train_scenes.end());
    std::sort(s.test_scenes.begin(), s.test_scenes.end());
    splits.push_back(std::move(s));
  }
  return splits;
}

std::vector<ManifestEntry> select_side(const std::vector<ManifestEntry>& entries,
                                       const std::vector<std::string>& scenes) {
  const std::set<std::string> keep(scenes.begin(), scenes.end());
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (keep.count(e.scene_id)) out.push_back(e);
  }
  return out;
}

std::vector<fs::path> sample_frames(const fs::path& frame_dir, double interval) {
  if (!fs::is_directory(frame_dir)) {
    throw Error(ErrorKind::kIo, "frame directory not found: " + frame_dir.string());
  }
  if (!(interval > 0.0)) throw Error(ErrorKind::kValidation, "sampling interval must be positive");
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(frame_dir)) {
    if (entry.is_regular_file() && IsFrameFile(entry.path())) frames.push_back(entry.path());
  }
  if (frames.empty()) throw Error(ErrorKind::kNoFrames, "no frames in " + frame_dir.string());
  std::sort(frames.begin(), frames.end());

  std::ifstream fps_file(frame_dir / "fps.txt");
  double fps = 0.0;
  if (!(fps_file >> fps) || !(fps > 0.0) || !std::isfinite(fps)) {
    throw Error(ErrorKind::kParse, "missing or invalid fps.txt in " + frame_dir.string());
  }
  std::vector<fs::path> sampled;
  for (long k = 0;; ++k) {
    const long long idx = std::llround(static_cast<double>(k) * interval * fps);
    if (idx >= static_cast<long long>(frames.size())) break;
    sampled.push_back(frames[static_cast<std::size_t>(idx)]);
  }
  return sampled;
}

void validate(const SyntheticSpec& spec) {
  if (spec.scenes < 2) throw Error(ErrorKind::kValidation, "synthetic set needs >= 2 scenes");
  if (spec.width < 16 || spec.height < 16) throw Error(ErrorKind::kValidation, "synthetic images too small");
  if (!(spec.mos_lo < spec.mos_hi)) throw Error(ErrorKind::kValidation, "MOS range must satisfy lo < hi");
  if (!(spec.span >= 0.0 && spec.span <= spec.mos_hi - spec.mos_lo)) {
    throw Error(ErrorKind::kValidation, "MOS span must lie within the MOS range");
  }
  if (spec.tile < 8) throw Error(ErrorKind::kValidation, "tile must be >= 8");
  for (const auto& v : expand_variants(spec)) {
    if (v.factor <= 1) throw Error(ErrorKind::kValidation, "downscale factors must be > 1");
  }
}

std::vector<SyntheticVariant> expand_variants(const SyntheticSpec& spec) {
  if (!spec.variants.empty()) return spec.variants;
  std::vector<SyntheticVariant> out;
  for (ResampleKernel k : spec.kernels) {
    for (int f : spec.downscale_factors) out.push_back({f, k});
  }
  return out;
}

double synthetic_mos(const SyntheticSpec& spec, int factor) {
  return spec.mos_hi - spec.span * (1.0 - 1.0 / static_cast<double>(factor));
}

RgbImage render_scene(const SyntheticSpec& spec, int scene_index) {
  const int w = spec.width, h = spec.height;
  std::mt19937_64 rng(MixSeed(spec.seed, static_cast<std::uint64_t>(scene_index)));
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Base: gradient between random corner colours.
  std::array<std::array<double, 3>, 4> corners{};
  for (auto& c : corners) {
    for (auto& v : c) v = 40.0 + 170.0 * uni(rng);
  }
  std::vector<double> rgb(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    const double ty = static_cast<double>(y) / (h - 1);
    for (int x = 0; x < w; ++x) {
      const double tx = static_cast<double>(x) / (w - 1);
      for (int c = 0; c < 3; ++c) {
        const double top = corners[0][c] * (1 - tx) + corners[1][c] * tx;
        const double bottom = corners[2][c] * (1 - tx) + corners[3][c] * tx;
        rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] = top * (1 - ty) + bottom * ty;
      }
    }
  }

  // Noise octaves from coarse to fine, then pixel-level grain. Amplitudes
  // vary only mildly between scenes so every scene carries detail at all
  // scales.
  for (const auto& [cell, base_amp] : {std::pair{64, 30.0}, std::pair{16, 18.0}, std::pair{4, 14.0},
                                       std::pair{2, 10.0}}) {
    const double amp = base_amp * (0.85 + 0.3 * uni(rng));
    const auto field = ValueNoise(w, h, cell, rng);
    const std::array<double, 3> tint = {0.8 + 0.4 * uni(rng), 0.8 + 0.4 * uni(rng), 0.8 + 0.4 * uni(rng)};
    for (std::size_t i = 0; i < field.size(); ++i) {
      for (int c = 0; c < 3; ++c) rgb[i * 3 + c] += amp * tint[c] * field[i];
    }
  }
  std::normal_distribution<double> grain(0.0, 1.0);
  const double grain_sigma = 9.0 + 3.0 * uni(rng);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    const double shared = grain(rng);
    for (int c = 0; c < 3; ++c) rgb[i * 3 + c] += grain_sigma * (0.7 * shared + 0.3 * grain(rng));
  }

  // Text-like glyph blocks, at least three of them filling whole grid tiles.
  const int tile = std::min({spec.tile, w, h});
  const int cols = w / tile, rows = h / tile;
  std::vector<int> tiles(static_cast<std::size_t>(cols) * rows);
  std::iota(tiles.begin(), tiles.end(), 0);
  for (std::size_t i = tiles.size(); i > 1; --i) std::swap(tiles[i - 1], tiles[rng() % i]);
  const std::size_t guaranteed = std::min<std::size_t>(3, tiles.size());
  for (std::size_t i = 0; i < guaranteed; ++i) {
    const int t = tiles[i];
    DrawGlyphBlock(rgb, w, h, (t % cols) * tile, (t / cols) * tile, tile, tile, rng);
  }
  const int extra = static_cast<int>(rng() % 4);
  for (int i = 0; i < extra; ++i) {
    const int bw = w / 8 + static_cast<int>(rng() % static_cast<unsigned>(w / 6));
    const int bh = h / 10 + static_cast<int>(rng() % static_cast<unsigned>(h / 8));
    const int x0 = static_cast<int>(rng() % static_cast<unsigned>(std::max(1, w - bw)));
    const int y0 = static_cast<int>(rng() % static_cast<unsigned>(std::max(1, h - bh)));
    DrawGlyphBlock(rgb, w, h, x0, y0, bw, bh, rng);
  }

  std::vector<std::uint8_t> px(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::clamp(std::lround(rgb[i]), 0L, 255L));
  }
  return RgbImage(w, h, std::move(px));
}

std::vector<ManifestEntry> generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  validate(spec);
  fs::create_directories(out_dir);
  const auto variants = expand_variants(spec);
  std::vector<ManifestEntry> entries;
  for (int k = 0; k < spec.scenes; ++k) {
    const std::string scene = "scene_" + std::to_string(k);
    const fs::path dir = out_dir / scene;
    fs::create_directories(dir);
    const RgbImage pristine = render_scene(spec, k);
    write_png(dir / "pristine.png", pristine);
    entries.push_back({(dir / "pristine.png").lexically_normal(), scene, spec.mos_hi, spec.mos_lo,
                       spec.mos_hi, Label::kTrue4k, MediaKind::kImage});
    for (const auto& v : variants) {
      const int lw = std::max(1, static_cast<int>(std::lround(static_cast<double>(spec.width) / v.factor)));
      const int lh = std::max(1, static_cast<int>(std::lround(static_cast<double>(spec.height) / v.factor)));
      const RgbImage low = resample(pristine, lw, lh, v.kernel);
      const RgbImage up = resample(low, spec.width, spec.height, v.kernel);
      const std::string name = "f" + std::to_string(v.factor) + "_" + std::string(KernelName(v.kernel)) + ".png";
      write_png(dir / name, up);
      entries.push_back({(dir / name).lexically_normal(), scene, synthetic_mos(spec, v.factor), spec.mos_lo,
                         spec.mos_hi, Label::kPseudo4k, MediaKind::kImage});
    }
  }
  write_manifest(out_dir / "manifest.csv", entries);
  return entries;
}

}  // namespace uhdiqa
