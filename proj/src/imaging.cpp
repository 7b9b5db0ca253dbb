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

#include "uhdiqa/imaging.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace uhdiqa {

namespace {

struct Taps {
  std::vector<int> first;       // per output sample, index into weights
  std::vector<int> count;
  std::vector<int> source;      // clamped source index per tap
  std::vector<double> weights;  // normalized to sum 1 per output sample
};

double KernelSupport(ResampleKernel kernel) {
  switch (kernel) {
    case ResampleKernel::kNearest: return 0.5;
    case ResampleKernel::kBilinear: return 1.0;
    case ResampleKernel::kBicubic: return 2.0;
    case ResampleKernel::kLanczos: return 3.0;
  }
  return 1.0;
}

double Sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double KernelWeight(ResampleKernel kernel, double x) {
  x = std::abs(x);
  switch (kernel) {
    case ResampleKernel::kNearest:
      return x < 0.5 ? 1.0 : 0.0;
    case ResampleKernel::kBilinear:
      return x < 1.0 ? 1.0 - x : 0.0;
    case ResampleKernel::kBicubic: {
      constexpr double a = -0.5;
      if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
      if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
      return 0.0;
    }
    case ResampleKernel::kLanczos:
      return x < 3.0 ? Sinc(x) * Sinc(x / 3.0) : 0.0;
  }
  return 0.0;
}

// Filter taps for one axis. On downscaling the kernel is stretched by the
// scale factor so it also acts as the anti-aliasing filter.
Taps ComputeTaps(int in_size, int out_size, ResampleKernel kernel) {
  Taps taps;
  const double scale = static_cast<double>(in_size) / out_size;
  taps.first.resize(out_size);
  taps.count.resize(out_size);
  if (kernel == ResampleKernel::kNearest) {
    for (int i = 0; i < out_size; ++i) {
      taps.first[i] = i;
      taps.count[i] = 1;
      taps.source.push_back(std::min(static_cast<int>((i + 0.5) * scale), in_size - 1));
      taps.weights.push_back(1.0);
    }
    return taps;
  }
  const double stretch = std::max(scale, 1.0);
  const double support = KernelSupport(kernel) * stretch;
  for (int i = 0; i < out_size; ++i) {
    const double center = (i + 0.5) * scale;
    const int lo = static_cast<int>(std::floor(center - support));
    const int hi = static_cast<int>(std::ceil(center + support));
    taps.first[i] = static_cast<int>(taps.weights.size());
    double total = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double w = KernelWeight(kernel, (j + 0.5 - center) / stretch);
      if (w == 0.0) continue;
      taps.source.push_back(std::clamp(j, 0, in_size - 1));
      taps.weights.push_back(w);
      total += w;
    }
    taps.count[i] = static_cast<int>(taps.weights.size()) - taps.first[i];
    for (int k = taps.first[i]; k < taps.first[i] + taps.count[i]; ++k) taps.weights[k] /= total;
  }
  return taps;
}

template <int Channels>
cv::Mat WrapMat(const Image<Channels>& img) {
  // OpenCV never writes through this header; the const_cast is confined here.
  auto px = img.pixels();
  return cv::Mat(img.height(), img.width(), CV_8UC(Channels),
                 const_cast<std::uint8_t*>(px.data()));
}

}  // namespace

std::string_view KernelName(ResampleKernel kernel) {
  switch (kernel) {
    case ResampleKernel::kNearest: return "nearest";
    case ResampleKernel::kBilinear: return "bilinear";
    case ResampleKernel::kBicubic: return "bicubic";
    case ResampleKernel::kLanczos: return "lanczos";
  }
  return "bilinear";
}

ResampleKernel ParseKernel(std::string_view name) {
  if (name == "nearest") return ResampleKernel::kNearest;
  if (name == "bilinear") return ResampleKernel::kBilinear;
  if (name == "bicubic") return ResampleKernel::kBicubic;
  if (name == "lanczos") return ResampleKernel::kLanczos;
  throw Error(ErrorKind::kValidation,
              "unknown resampling kernel '" + std::string(name) + "'");
}

GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const unsigned r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    // Integer weights summing to 1000 keep the rounding exact.
    dst[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return out;
}

RgbImage resample(const RgbImage& img, int new_w, int new_h,
                  ResampleKernel kernel) {
  if (new_w < 1 || new_h < 1) {
    throw Error(ErrorKind::kDegenerateInput, "resample target must be >= 1x1");
  }
  if (new_w == img.width() && new_h == img.height() &&
      kernel == ResampleKernel::kNearest) {
    return img;
  }
  const Taps tx = ComputeTaps(img.width(), new_w, kernel);
  const Taps ty = ComputeTaps(img.height(), new_h, kernel);
  const int in_w = img.width();
  const auto src = img.pixels();

  // Horizontal pass into doubles, then vertical pass with rounding.
  std::vector<double> rows(static_cast<std::size_t>(img.height()) * new_w * 3);
  for (int y = 0; y < img.height(); ++y) {
    const std::uint8_t* in_row = src.data() + static_cast<std::size_t>(y) * in_w * 3;
    double* out_row = rows.data() + static_cast<std::size_t>(y) * new_w * 3;
    for (int x = 0; x < new_w; ++x) {
      double acc[3] = {0.0, 0.0, 0.0};
      for (int k = tx.first[x]; k < tx.first[x] + tx.count[x]; ++k) {
        const std::uint8_t* p = in_row + static_cast<std::size_t>(tx.source[k]) * 3;
        for (int c = 0; c < 3; ++c) acc[c] += tx.weights[k] * p[c];
      }
      for (int c = 0; c < 3; ++c) out_row[x * 3 + c] = acc[c];
    }
  }
  std::vector<std::uint8_t> data(static_cast<std::size_t>(new_w) * new_h * 3);
  const std::size_t stride = static_cast<std::size_t>(new_w) * 3;
  for (int y = 0; y < new_h; ++y) {
    for (std::size_t i = 0; i < stride; ++i) {
      double acc = 0.0;
      for (int k = ty.first[y]; k < ty.first[y] + ty.count[y]; ++k) {
        acc += ty.weights[k] * rows[static_cast<std::size_t>(ty.source[k]) * stride + i];
      }
      data[y * stride + i] = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
    }
  }
  return RgbImage(new_w, new_h, std::move(data));
}

RgbImage read_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw Error(ErrorKind::kIo, "cannot read image " + path.string());
  }
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (!rgb.isContinuous()) rgb = rgb.clone();
  std::vector<std::uint8_t> data(rgb.datastart, rgb.dataend);
  return RgbImage(rgb.cols, rgb.rows, std::move(data));
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  cv::Mat bgr;
  cv::cvtColor(WrapMat(img), bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) {
    throw Error(ErrorKind::kIo, "cannot write " + path.string());
  }
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  if (!cv::imwrite(path.string(), WrapMat(img))) {
    throw Error(ErrorKind::kIo, "cannot write " + path.string());
  }
}

}  // namespace uhdiqa
