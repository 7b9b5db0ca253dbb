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
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "uhdiqa/heads.hpp"

namespace uhdiqa {
namespace {

QualityFeature RandomFeature(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  QualityFeature f;
  f.vector.resize(n);
  for (auto& v : f.vector) v = u(rng);
  return f;
}

// Scalar two-layer forward with rectified hidden units.
std::vector<double> OracleForward(MlpHead& head, const std::vector<double>& f) {
  const auto& w1 = head.fc1().weight.value;
  const auto& b1 = head.fc1().bias.value;
  const auto& w2 = head.fc2().weight.value;
  const auto& b2 = head.fc2().bias.value;
  const int in = head.spec().input_dim, hid = head.spec().hidden_dim;
  std::vector<double> h(hid);
  for (int j = 0; j < hid; ++j) {
    double s = b1[j];
    for (int i = 0; i < in; ++i) s += w1[j * in + i] * f[i];
    h[j] = s > 0 ? s : 0;
  }
  const int outs = static_cast<int>(b2.size());
  std::vector<double> z(outs);
  for (int k = 0; k < outs; ++k) {
    double s = b2[k];
    for (int j = 0; j < hid; ++j) s += w2[k * hid + j] * h[j];
    z[k] = s;
  }
  return z;
}

MlpHead RandomHead(HeadTask task, int in, int hidden, std::uint64_t seed) {
  MlpHead head("h", HeadSpec{in, hidden, task});
  std::mt19937_64 rng(seed);
  head.init(rng);
  std::normal_distribution<double> nd(0, 0.1);
  for (auto* p : head.params())
    for (auto& v : p->value) v += nd(rng);
  return head;
}

TEST(Softmax, SymmetricAndSaturating) {
  const auto even = softmax2(3.0, 3.0);
  EXPECT_EQ(even[0], 0.5);
  EXPECT_EQ(even[1], 0.5);
  const auto sat = softmax2(5.0, -15.0);
  EXPECT_NEAR(sat[0], 1.0, 1e-8);
  const auto huge = softmax2(1000.0, -1000.0);
  EXPECT_TRUE(std::isfinite(huge[0]));
  EXPECT_EQ(huge[0] + huge[1], 1.0);
}

TEST(Classify, MatchesScalarOracle) {
  auto head = RandomHead(HeadTask::kClassification, 12, 7, 1);
  const auto f = RandomFeature(12, 2);
  const auto z = OracleForward(head, f.vector);
  const double m = std::max(z[0], z[1]);
  const double a = std::exp(z[0] - m), b = std::exp(z[1] - m);
  const auto p = classify_patch(f, head);
  EXPECT_NEAR(p[0], a / (a + b), 1e-12);
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
}

TEST(Regress, MatchesScalarOracle) {
  auto head = RandomHead(HeadTask::kRegression, 20, 9, 3);
  const auto f = RandomFeature(20, 4);
  EXPECT_NEAR(regress_patch(f, head), OracleForward(head, f.vector)[0], 1e-12);
}

TEST(Regress, ZeroWeightsGiveZero) {
  MlpHead head("z", HeadSpec{6, 4, HeadTask::kRegression});
  EXPECT_EQ(regress_patch(RandomFeature(6, 5), head), 0.0);
}

TEST(Regress, SingleUnitCopiesCoordinate) {
  MlpHead head("c", HeadSpec{5, 1, HeadTask::kRegression});
  head.fc1().weight.value[2] = 1.0;
  head.fc2().weight.value[0] = 1.0;
  head.fc2().bias.value[0] = 10.0;
  const auto f = RandomFeature(5, 6);
  EXPECT_DOUBLE_EQ(regress_patch(f, head), f.vector[2] + 10.0);
}

TEST(Heads, DimensionMismatchIsShapeError) {
  auto head = RandomHead(HeadTask::kRegression, 8, 4, 7);
  try {
    regress_patch(RandomFeature(9, 8), head);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
  EXPECT_THROW(classify_patch(RandomFeature(8, 8), head), Error);
}

TEST(Heads, BackwardMatchesFiniteDifferenceOnInput) {
  auto head = RandomHead(HeadTask::kRegression, 6, 5, 9);
  const auto f = RandomFeature(6, 10);
  MlpHead::Cache cache;
  head.forward(f.vector, &cache);
  const std::vector<double> dout = {1.0};
  const auto df = head.backward(cache, dout);
  for (int i = 0; i < 6; ++i) {
    auto hi = f.vector, lo = f.vector;
    hi[i] += 1e-6;
    lo[i] -= 1e-6;
    const double num = (head.forward(hi)[0] - head.forward(lo)[0]) / 2e-6;
    EXPECT_NEAR(df[i], num, 1e-6);
  }
}

TEST(Pool, ArithmeticMean) {
  const std::vector<PatchPrediction> p = {{0.9, 80}, {0.8, 70}, {1.0, 90}};
  const auto img = pool_image(p);
  EXPECT_NEAR(img.y_pred, 0.9, 1e-15);
  EXPECT_NEAR(img.q_score, 80.0, 1e-12);
  EXPECT_EQ(img.n_patches, 3);
}

TEST(Pool, SingleAndEmpty) {
  const std::vector<PatchPrediction> one = {{0.3, 42.5}};
  const auto img = pool_image(one);
  EXPECT_EQ(img.y_pred, 0.3);
  EXPECT_EQ(img.q_score, 42.5);
  try {
    pool_image({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyInput);
  }
}

TEST(Pool, MatchesSummationOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u;
  std::vector<PatchPrediction> p(100);
  for (auto& x : p) x = {u(rng), 100 * u(rng)};
  long double sy = 0, sq = 0;
  for (const auto& x : p) {
    sy += x.y;
    sq += x.q;
  }
  const auto img = pool_image(p);
  EXPECT_NEAR(img.y_pred, static_cast<double>(sy / 100), 1e-12);
  EXPECT_NEAR(img.q_score, static_cast<double>(sq / 100), 1e-12);
}

TEST(Pool, PermutationInvariantWithinRounding) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u;
  std::vector<PatchPrediction> p(37);
  for (auto& x : p) x = {u(rng), 100 * u(rng)};
  const auto a = pool_image(p);
  std::shuffle(p.begin(), p.end(), rng);
  const auto b = pool_image(p);
  EXPECT_NEAR(a.q_score, b.q_score, 1e-12);
}

TEST(Decide, ThresholdIsInclusive) {
  EXPECT_EQ(decide_class({0.7, 0, 1}), Decision::kTrue4k);
  EXPECT_EQ(decide_class({0.5, 0, 1}), Decision::kTrue4k);
  EXPECT_EQ(decide_class({0.49, 0, 1}), Decision::kPseudo4k);
  EXPECT_EQ(decide_class({0.7, 0, 1}, 0.8), Decision::kPseudo4k);
  EXPECT_EQ(DecisionName(Decision::kPseudo4k), "pseudo_4k");
}

}  // namespace
}  // namespace uhdiqa
