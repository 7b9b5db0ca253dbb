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

#include <span>
#include <string_view>
#include <vector>

#include "uhdiqa/heads.hpp"

namespace uhdiqa {

// Fractional ranks (1-based), ties share the mean of their positions.
std::vector<double> mid_ranks(std::span<const double> v);

double pearson(std::span<const double> a, std::span<const double> b);

// Spearman: Pearson correlation of mid-ranks.
double srcc(std::span<const double> pred, std::span<const double> mos);

// Kendall tau-b, O(n log n).
double krcc(std::span<const double> pred, std::span<const double> mos);

// f(x) = (beta1 - beta2) / (1 + exp(-(x - beta3) / beta4)) + beta2, with
// beta4 > 0 after fitting.
struct LogisticParams {
  double beta1 = 1.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  double beta4 = 1.0;
  bool converged = false;
  int iterations = 0;
  double sse = 0.0;
};

double logistic4(const LogisticParams& p, double x);
std::vector<double> apply_logistic(const LogisticParams& p, std::span<const double> x);

// Levenberg-Marquardt least squares from beta = (max mos, min mos,
// median pred, std pred). Stops when an accepted step improves the objective
// by less than 1e-10 relative, or after 1000 iterations.
LogisticParams fit_logistic(std::span<const double> pred, std::span<const double> mos);

struct MappedAgreement {
  double plcc = 0.0;
  double rmse = 0.0;
  LogisticParams mapping;
};

MappedAgreement plcc_rmse_after_mapping(std::span<const double> pred,
                                        std::span<const double> mos);

struct RegressionReport {
  double srcc = 0.0;
  double krcc = 0.0;
  double plcc = 0.0;
  double rmse = 0.0;
  int n = 0;
};

RegressionReport regression_report(std::span<const double> pred, std::span<const double> mos);

struct ClassificationReport {
  double p_t = 0.0;  // precision, true-4K (positive) class
  double p_f = 0.0;  // precision, pseudo-4K (negative) class
  double r_t = 0.0;
  double r_f = 0.0;
  double accuracy = 0.0;
  int tp = 0, fp = 0, tn = 0, fn = 0;
  // Set when the matching ratio had a zero denominator and was reported as 0.
  bool p_t_undefined = false, p_f_undefined = false;
  bool r_t_undefined = false, r_f_undefined = false;
};

ClassificationReport classification_report(std::span<const Decision> decisions,
                                           std::span<const Decision> labels);

enum class FTestVerdict { kABetter, kBBetter, kIndistinguishable };

std::string_view FTestVerdictName(FTestVerdict v);

struct FTestResult {
  FTestVerdict verdict = FTestVerdict::kIndistinguishable;
  double ratio = 1.0;  // var(a) / var(b)
  double lower_quantile = 0.0;
  double upper_quantile = 0.0;
};

// Plain two-sided variance-ratio F test on residuals; the smaller-variance
// side wins when the ratio leaves the [alpha/2, 1 - alpha/2] band.
FTestResult residual_f_test(std::span<const double> residuals_a,
                            std::span<const double> residuals_b, double alpha = 0.05);

}  // namespace uhdiqa
