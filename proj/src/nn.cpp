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

#include "uhdiqa/nn.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numeric>

#include "uhdiqa/error.hpp"

namespace uhdiqa {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

std::size_t Product(const std::vector<int>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

}  // namespace

Param::Param(std::string n, std::vector<int> s)
    : name(std::move(n)), shape(std::move(s)), value(Product(shape), 0.0),
      grad(value.size(), 0.0) {}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels,
               int kernel, int stride)
    : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels), out_(out_channels), k_(kernel), stride_(stride),
      pad_(kernel / 2) {}

Tensor3 Conv2d::forward(const Tensor3& x, Cache* cache) const {
  if (x.channels != in_) {
    throw Error(ErrorKind::kShape, weight.name + ": expected " +
                                       std::to_string(in_) + " input channels, got " +
                                       std::to_string(x.channels));
  }
  const int oh = output_size(x.height), ow = output_size(x.width);
  const int rows = in_ * k_ * k_;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;

  // Inference reuses a per-thread buffer instead of allocating columns.
  thread_local Cache scratch;
  Cache& c = cache != nullptr ? *cache : scratch;
  c.in_h = x.height;
  c.in_w = x.width;
  c.columns.assign(static_cast<std::size_t>(rows) * cols, 0.0);

  for (int ch = 0; ch < in_; ++ch) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        double* row = c.columns.data() + ((ch * k_ + ky) * k_ + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= x.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            if (ix < 0 || ix >= x.width) continue;
            row[static_cast<std::size_t>(oy) * ow + ox] = x.at(ch, iy, ix);
          }
        }
      }
    }
  }

  Tensor3 y(out_, oh, ow);
  ConstMapMatrix w(weight.value.data(), out_, rows);
  ConstMapMatrix col(c.columns.data(), rows, static_cast<Eigen::Index>(cols));
  MapMatrix out(y.data.data(), out_, static_cast<Eigen::Index>(cols));
  out.noalias() = w * col;
  for (int o = 0; o < out_; ++o) out.row(o).array() += bias.value[o];
  return y;
}

Tensor3 Conv2d::backward(const Cache& cache, const Tensor3& dy,
                         bool want_input_grad) {
  const int rows = in_ * k_ * k_;
  const Eigen::Index cols = static_cast<Eigen::Index>(dy.plane());
  ConstMapMatrix g(dy.data.data(), out_, cols);
  ConstMapMatrix col(cache.columns.data(), rows, cols);

  MapMatrix dw(weight.grad.data(), out_, rows);
  dw.noalias() += g * col.transpose();
  for (int o = 0; o < out_; ++o) bias.grad[o] += g.row(o).sum();

  if (!want_input_grad) return {};

  thread_local std::vector<double> dcol_buffer;
  dcol_buffer.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  MapMatrix dcol(dcol_buffer.data(), rows, cols);
  dcol.noalias() = ConstMapMatrix(weight.value.data(), out_, rows).transpose() * g;
  Tensor3 dx(in_, cache.in_h, cache.in_w);
  const int oh = dy.height, ow = dy.width;
  for (int ch = 0; ch < in_; ++ch) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const double* row = dcol.data() + static_cast<std::size_t>((ch * k_ + ky) * k_ + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= dx.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            if (ix < 0 || ix >= dx.width) continue;
            dx.at(ch, iy, ix) += row[static_cast<std::size_t>(oy) * ow + ox];
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::init_he(std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (in_ * k_ * k_)));
  for (auto& v : weight.value) v = dist(rng);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Linear::Linear(const std::string& name, int in_features, int out_features)
    : weight(name + ".weight", {out_features, in_features}),
      bias(name + ".bias", {out_features}), in_(in_features), out_(out_features) {}

std::vector<double> Linear::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != in_) {
    throw Error(ErrorKind::kShape, weight.name + ": expected input of length " +
                                       std::to_string(in_) + ", got " +
                                       std::to_string(x.size()));
  }
  std::vector<double> y(bias.value);
  for (int o = 0; o < out_; ++o) {
    const double* w = weight.value.data() + static_cast<std::size_t>(o) * in_;
    double acc = 0.0;
    for (int i = 0; i < in_; ++i) acc += w[i] * x[i];
    y[o] += acc;
  }
  return y;
}

std::vector<double> Linear::backward(std::span<const double> x,
                                     std::span<const double> dy) {
  std::vector<double> dx(static_cast<std::size_t>(in_), 0.0);
  for (int o = 0; o < out_; ++o) {
    const double g = dy[o];
    bias.grad[o] += g;
    if (g == 0.0) continue;
    double* gw = weight.grad.data() + static_cast<std::size_t>(o) * in_;
    const double* w = weight.value.data() + static_cast<std::size_t>(o) * in_;
    for (int i = 0; i < in_; ++i) {
      gw[i] += g * x[i];
      dx[i] += g * w[i];
    }
  }
  return dx;
}

void Linear::init_he(std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / in_));
  for (auto& v : weight.value) v = dist(rng);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

void Linear::init_uniform(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : weight.value) v = dist(rng);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

void relu_inplace(std::span<double> v) {
  for (auto& x : v) x = x > 0.0 ? x : 0.0;
}

void relu_backward_inplace(std::span<const double> activated, std::span<double> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (activated[i] <= 0.0) grad[i] = 0.0;
  }
}

}  // namespace uhdiqa
