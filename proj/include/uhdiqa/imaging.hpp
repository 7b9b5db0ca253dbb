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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "uhdiqa/error.hpp"

namespace uhdiqa {

// Row-major 8-bit image with interleaved channels and a top-left origin.
template <int Channels>
class Image {
  static_assert(Channels == 1 || Channels == 3);

 public:
  static constexpr int kChannels = Channels;

  Image() = default;
  Image(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(ErrorKind::kDegenerateInput, "image dimensions must be >= 1");
    }
    data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
  }
  Image(int width, int height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1 ||
        data_.size() != static_cast<std::size_t>(width) * height * Channels) {
      throw Error(ErrorKind::kShape, "pixel buffer does not match dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }

  std::span<const std::uint8_t> pixels() const noexcept { return data_; }
  std::span<std::uint8_t> pixels() noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

using RgbImage = Image<3>;
using GrayImage = Image<1>;

enum class ResampleKernel { kNearest, kBilinear, kBicubic, kLanczos };

std::string_view KernelName(ResampleKernel kernel);
ResampleKernel ParseKernel(std::string_view name);

// BT.601 luma, rounded half up.
GrayImage to_gray(const RgbImage& img);

template <int Channels>
Image<Channels> crop(const Image<Channels>& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > img.width() ||
      y0 + h > img.height()) {
    throw Error(ErrorKind::kBounds, "crop rectangle outside image");
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h * Channels);
  const auto src = img.pixels();
  const std::size_t row_bytes = static_cast<std::size_t>(w) * Channels;
  for (int y = 0; y < h; ++y) {
    const std::size_t from =
        (static_cast<std::size_t>(y0 + y) * img.width() + x0) * Channels;
    std::copy_n(src.begin() + from, row_bytes, out.begin() + y * row_bytes);
  }
  return Image<Channels>(w, h, std::move(out));
}

// Separable resampling with edge clamping; the kernel is widened by the scale
// factor when shrinking.
RgbImage resample(const RgbImage& img, int new_w, int new_h,
                  ResampleKernel kernel);

RgbImage read_rgb(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

}  // namespace uhdiqa
