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
#include <random>
#include <span>
#include <string>
#include <vector>

namespace uhdiqa {

// Channel-major feature map (C x H x W).
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
};

// A learnable tensor with its gradient accumulator.
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string n, std::vector<int> s);
  std::size_t size() const noexcept { return value.size(); }
  void zero_grad();
};

// 2-D convolution, square kernel, zero padding of kernel/2.
class Conv2d {
 public:
  struct Cache {
    std::vector<double> columns;  // im2col of the input, (in*k*k) x (oh*ow)
    int in_h = 0;
    int in_w = 0;
  };

  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel,
         int stride);

  int in_channels() const noexcept { return in_; }
  int out_channels() const noexcept { return out_; }
  int output_size(int input) const noexcept { return (input + 2 * pad_ - k_) / stride_ + 1; }

  Tensor3 forward(const Tensor3& x, Cache* cache = nullptr) const;
  // Accumulates weight/bias gradients; returns dL/dx when wanted.
  Tensor3 backward(const Cache& cache, const Tensor3& dy, bool want_input_grad);

  void init_he(std::mt19937_64& rng);

  Param weight;  // out x in x k x k
  Param bias;    // out

 private:
  int in_, out_, k_, stride_, pad_;
};

// Fully connected layer y = W x + b.
class Linear {
 public:
  Linear(const std::string& name, int in_features, int out_features);

  int in_features() const noexcept { return in_; }
  int out_features() const noexcept { return out_; }

  std::vector<double> forward(std::span<const double> x) const;
  // Accumulates gradients given the forward input; returns dL/dx.
  std::vector<double> backward(std::span<const double> x, std::span<const double> dy);

  void init_he(std::mt19937_64& rng);
  void init_uniform(std::mt19937_64& rng);

  Param weight;  // out x in
  Param bias;    // out

 private:
  int in_, out_;
};

void relu_inplace(std::span<double> v);
// Zeroes gradient entries whose forward activation was clipped.
void relu_backward_inplace(std::span<const double> activated, std::span<double> grad);

}  // namespace uhdiqa
