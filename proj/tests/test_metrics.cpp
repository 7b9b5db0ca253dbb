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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "uhdiqa/metrics.hpp"

namespace uhdiqa {
namespace {

// Rank by counting: 1 + #smaller + (#equal - 1) / 2.
std::vector<double> CountRanks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = 1 + less + (equal - 1) / 2;
  }
  return r;
}

double NaivePearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double PairTauB(const std::vector<double>& a, const std::vector<double>& b) {
  double c = 0, d = 0, ta = 0, tb = 0, n0 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      n0 += 1;
      const double s = (a[i] - a[j]) * (b[i] - b[j]);
      if (a[i] == a[j]) ta += 1;
      if (b[i] == b[j]) tb += 1;
      if (s > 0) c += 1;
      if (s < 0) d += 1;
    }
  }
  return (c - d) / std::sqrt((n0 - ta) * (n0 - tb));
}

std::vector<double> TiedVector(std::mt19937_64& rng, int n, int levels) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(rng() % levels);
  return v;
}

TEST(Ranks, MidRanksAverageTies) {
  const std::vector<double> v = {3, 1, 3, 2, 3};
  EXPECT_EQ(mid_ranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
}

TEST(Srcc, HandCases) {
  const std::vector<double> a = {1, 2, 3};
  EXPECT_DOUBLE_EQ(srcc(a, std::vector<double>{10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(srcc(a, std::vector<double>{30, 20, 10}), -1.0);
}

TEST(Srcc, MatchesRankOracleWithTies) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto a = TiedVector(rng, 50, 12), b = TiedVector(rng, 50, 9);
    EXPECT_NEAR(srcc(a, b), NaivePearson(CountRanks(a), CountRanks(b)), 1e-9);
  }
}

TEST(Krcc, HandCases) {
  EXPECT_NEAR(krcc(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 1.0 / 3, 1e-15);
  const std::vector<double> v = {4, 1, 7, 7, 2};
  EXPECT_DOUBLE_EQ(krcc(v, v), 1.0);
}

TEST(Krcc, MatchesPairOracleWithTies) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(rng() % 60);
    auto a = TiedVector(rng, n, 7), b = TiedVector(rng, n, 5);
    if (CountRanks(a) == std::vector<double>(n, (n + 1) / 2.0)) a[0] += 100;
    if (CountRanks(b) == std::vector<double>(n, (n + 1) / 2.0)) b[0] += 100;
    EXPECT_NEAR(krcc(a, b), PairTauB(a, b), 1e-9);
  }
}

TEST(Correlation, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<double> a(40), b(40), ea(40);
  for (int i = 0; i < 40; ++i) {
    a[i] = nd(rng);
    b[i] = a[i] + nd(rng);
    ea[i] = std::exp(3 * a[i]) + 5;
  }
  EXPECT_NEAR(srcc(a, b), srcc(ea, b), 1e-12);
  EXPECT_NEAR(krcc(a, b), krcc(ea, b), 1e-12);
}

TEST(Correlation, TwoPointsAgree) {
  const std::vector<double> a = {1, 2}, b = {5, -1};
  EXPECT_EQ(srcc(a, b), -1.0);
  EXPECT_EQ(krcc(a, b), -1.0);
}

TEST(Correlation, Errors) {
  const std::vector<double> flat = {2, 2, 2}, ok = {1, 2, 3};
  try {
    srcc(flat, ok);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUndefinedCorrelation);
  }
  EXPECT_THROW(krcc(ok, flat), Error);
  EXPECT_THROW(srcc(ok, std::vector<double>{1, 2}), Error);
}

TEST(Logistic, SelfConsistentRefit) {
  const LogisticParams truth{90, 10, 0.5, 0.2};
  std::vector<double> x, y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(-0.5 + i / 30.0);
    y.push_back(logistic4(truth, x.back()));
  }
  const auto fit = plcc_rmse_after_mapping(x, y);
  EXPECT_LT(fit.rmse, 1e-6);
  EXPECT_NEAR(fit.plcc, 1.0, 1e-6);
  EXPECT_GT(fit.mapping.beta4, 0.0);
}

TEST(Logistic, SignFlipIsSameCurve) {
  const LogisticParams a{80, 20, 1.0, 0.5};
  const LogisticParams b{20, 80, 1.0, -0.5};
  for (double x = -3; x <= 3; x += 0.25) EXPECT_NEAR(logistic4(a, x), logistic4(b, x), 1e-12);
  std::vector<double> x, y;
  for (int i = 0; i < 30; ++i) {
    x.push_back(i / 10.0);
    y.push_back(logistic4(b, x.back()));
  }
  EXPECT_GT(fit_logistic(x, y).beta4, 0.0);
}

TEST(Logistic, NearIdentityDoesNotWorsen) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(40, 60);
  std::vector<double> x(50), y(50);
  double raw = 0;
  for (int i = 0; i < 50; ++i) {
    x[i] = u(rng);
    y[i] = x[i] + (u(rng) - 50) * 0.1;
    raw += (x[i] - y[i]) * (x[i] - y[i]);
  }
  EXPECT_LE(plcc_rmse_after_mapping(x, y).rmse, std::sqrt(raw / 50) + 1e-12);
}

TEST(Logistic, IndependentDataHasSmallPlcc) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  std::vector<double> x(100), y(100);
  for (int i = 0; i < 100; ++i) {
    x[i] = u(rng);
    y[i] = 100 * u(rng);
  }
  EXPECT_LT(std::abs(plcc_rmse_after_mapping(x, y).plcc), 0.3);
}

TEST(Logistic, DegenerateInputs) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6}, c = {7, 7, 7, 7, 7, 7};
  EXPECT_THROW(fit_logistic(c, x), Error);
  EXPECT_NEAR(fit_logistic(x, c).sse, 0.0, 1e-20);
  try {
    plcc_rmse_after_mapping(x, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUndefinedCorrelation);
  }
  EXPECT_THROW(fit_logistic(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), Error);
}

TEST(Classification, AllCorrect) {
  const std::vector<Decision> d = {Decision::kTrue4k, Decision::kPseudo4k, Decision::kPseudo4k};
  const auto r = classification_report(d, d);
  EXPECT_EQ(r.p_t, 1.0);
  EXPECT_EQ(r.p_f, 1.0);
  EXPECT_EQ(r.r_t, 1.0);
  EXPECT_EQ(r.r_f, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
}

TEST(Classification, AlwaysPseudoRow) {
  std::vector<Decision> labels(10000, Decision::kPseudo4k);
  std::fill(labels.begin(), labels.begin() + 1373, Decision::kTrue4k);
  const std::vector<Decision> d(labels.size(), Decision::kPseudo4k);
  const auto r = classification_report(d, labels);
  EXPECT_EQ(r.p_t, 0.0);
  EXPECT_TRUE(r.p_t_undefined);
  EXPECT_EQ(r.r_t, 0.0);
  EXPECT_FALSE(r.r_t_undefined);
  EXPECT_NEAR(r.p_f, 0.8627, 1e-12);
  EXPECT_EQ(r.r_f, 1.0);
  EXPECT_NEAR(r.accuracy, 0.8627, 1e-12);
}

TEST(Classification, MatchesCountingOracle) {
  std::mt19937_64 rng(6);
  std::vector<Decision> d(200), l(200);
  int tp = 0, fp = 0, tn = 0, fn = 0;
  for (int i = 0; i < 200; ++i) {
    d[i] = rng() % 2 ? Decision::kTrue4k : Decision::kPseudo4k;
    l[i] = rng() % 3 ? Decision::kTrue4k : Decision::kPseudo4k;
    const bool pd = d[i] == Decision::kTrue4k, pl = l[i] == Decision::kTrue4k;
    tp += pd && pl;
    fp += pd && !pl;
    tn += !pd && !pl;
    fn += !pd && pl;
  }
  const auto r = classification_report(d, l);
  EXPECT_EQ(r.tp, tp);
  EXPECT_EQ(r.fp, fp);
  EXPECT_EQ(r.tn, tn);
  EXPECT_EQ(r.fn, fn);
  EXPECT_DOUBLE_EQ(r.p_t, double(tp) / (tp + fp));
  EXPECT_DOUBLE_EQ(r.r_f, double(tn) / (tn + fp));
  EXPECT_DOUBLE_EQ(r.accuracy, double(tp + tn) / 200);
}

TEST(Classification, Errors) {
  const std::vector<Decision> one = {Decision::kTrue4k};
  EXPECT_THROW(classification_report(one, {}), Error);
  EXPECT_THROW(classification_report({}, {}), Error);
}

TEST(FTest, Verdicts) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  std::vector<double> small(100), big(100);
  for (int i = 0; i < 100; ++i) {
    small[i] = nd(rng);
    big[i] = 10 * nd(rng);
  }
  EXPECT_EQ(residual_f_test(small, small).verdict, FTestVerdict::kIndistinguishable);
  EXPECT_EQ(residual_f_test(small, big).verdict, FTestVerdict::kABetter);
  EXPECT_EQ(residual_f_test(big, small).verdict, FTestVerdict::kBBetter);
}

TEST(FTest, QuantilesMatchTable) {
  // F(0.975; 9, 9) = 4.026 from standard tables.
  std::vector<double> a(10), b(10);
  for (int i = 0; i < 10; ++i) {
    a[i] = i;
    b[i] = i * 1.5;
  }
  const auto r = residual_f_test(a, b);
  EXPECT_NEAR(r.upper_quantile, 4.026, 1e-3);
  EXPECT_NEAR(r.lower_quantile, 1 / 4.026, 1e-3);
  EXPECT_NEAR(r.ratio, 1 / 2.25, 1e-12);
}

TEST(FTest, Degenerate) {
  const std::vector<double> flat = {1, 1, 1}, ok = {1, 2, 3};
  try {
    residual_f_test(flat, ok);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateTest);
  }
  EXPECT_THROW(residual_f_test(std::vector<double>{1}, ok), Error);
}

}  // namespace
}  // namespace uhdiqa
